#include <cmath>

#include "gsedit/errors.hpp"
#include "gsedit/optimizer.hpp"

namespace gsedit {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-15;

// Flat layout: position 0-2, log_scale 3-5, rotation 6-9, opacity 10, color 11-13.
std::array<double, 14> flatten(const ParamGradients& g, std::size_t i) {
  return {g.position[i].x(), g.position[i].y(), g.position[i].z(),
          g.log_scale[i].x(), g.log_scale[i].y(), g.log_scale[i].z(),
          g.rotation[i][0], g.rotation[i][1], g.rotation[i][2], g.rotation[i][3],
          g.opacity_logit[i],
          g.color[i].x(), g.color[i].y(), g.color[i].z()};
}

float* slot(GaussianParams& p, int k) {
  if (k < 3) return &p.position[k];
  if (k < 6) return &p.log_scale[k - 3];
  if (k < 10) return &p.rotation[k - 6];
  if (k == 10) return &p.opacity_logit;
  return &p.color[k - 11];
}

}  // namespace

void Adam::ensure(std::size_t n) {
  if (steps_.size() < n) {
    steps_.resize(n, 0);
    m_.resize(n, std::array<double, 14>{});
    v_.resize(n, std::array<double, 14>{});
  }
}

void Adam::step(GaussianScene& scene, const ParamGradients& grads) {
  if (grads.size() != scene.size()) throw ContractViolation("Adam::step: gradient count differs from scene");
  ensure(scene.size());
  const std::array<double, 5> group_lr = {lr_.position, lr_.log_scale, lr_.rotation, lr_.opacity, lr_.color};
  auto lr_of = [&](int k) { return group_lr[k < 3 ? 0 : k < 6 ? 1 : k < 10 ? 2 : k == 10 ? 3 : 4]; };

  for (std::size_t i = 0; i < scene.size(); ++i) {
    Gaussian& gs = scene.gaussians[i];
    if (!gs.aux.label) continue;
    const auto g = flatten(grads, i);
    const std::int64_t t = ++steps_[i];
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    for (int k = 0; k < 14; ++k) {
      m_[i][k] = kBeta1 * m_[i][k] + (1.0 - kBeta1) * g[k];
      v_[i][k] = kBeta2 * v_[i][k] + (1.0 - kBeta2) * g[k] * g[k];
      const double update = lr_of(k) * (m_[i][k] / c1) / (std::sqrt(v_[i][k] / c2) + kEps);
      float* p = slot(gs.params, k);
      *p = static_cast<float>(*p - update);
    }
    const Eigen::Vector4d q = gs.params.rotation.cast<double>();
    const double norm = q.norm();
    gs.params.rotation = norm > 0.0 ? (q / norm).cast<float>() : Eigen::Vector4f(1, 0, 0, 0);
  }
}

void Adam::apply(const IndexRemap& remap) {
  const std::size_t n = remap.new_to_old.size();
  std::vector<std::int64_t> steps(n, 0);
  std::vector<std::array<double, 14>> m(n, std::array<double, 14>{}), v(n, std::array<double, 14>{});
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t old = remap.new_to_old[i];
    if (old < 0 || static_cast<std::size_t>(old) >= steps_.size()) continue;
    steps[i] = steps_[old];
    m[i] = m_[old];
    v[i] = v_[old];
  }
  steps_ = std::move(steps);
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace gsedit

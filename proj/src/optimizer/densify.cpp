#include <cmath>

#include "gsedit/errors.hpp"
#include "gsedit/optimizer.hpp"

namespace gsedit {

void DensifyStats::resize(std::size_t n) {
  screen_norm_sum.assign(n, 0.0);
  visible_count.assign(n, 0);
  position_grad_sum.assign(n, Eigen::Vector3d::Zero());
}

void DensifyStats::reset() { resize(screen_norm_sum.size()); }

void DensifyStats::accumulate(const ParamGradients& grads, const RenderOutput& render, const GaussianScene& scene) {
  if (screen_norm_sum.size() != scene.size()) resize(scene.size());
  for (const Splat2D& s : render.splats) {
    const std::size_t i = static_cast<std::size_t>(s.gaussian_index);
    if (!scene.gaussians[i].aux.label) continue;
    screen_norm_sum[i] += grads.screen_position[i].norm();
    position_grad_sum[i] += grads.position[i];
    ++visible_count[i];
  }
}

double DensifyStats::mean_screen_norm(std::size_t i) const {
  return visible_count[i] > 0 ? screen_norm_sum[i] / static_cast<double>(visible_count[i]) : 0.0;
}

Eigen::Vector3d DensifyStats::mean_position_grad(std::size_t i) const {
  return visible_count[i] > 0 ? Eigen::Vector3d(position_grad_sum[i] / static_cast<double>(visible_count[i]))
                              : Eigen::Vector3d::Zero();
}

namespace {

// Uniform point in the unit ball by rejection.
Eigen::Vector3d unit_ball(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    Eigen::Vector3d p(u(rng), u(rng), u(rng));
    if (p.squaredNorm() <= 1.0) return p;
  }
}

}  // namespace

DensifyResult densify_and_prune(GaussianScene& scene, const DensifyStats& stats, const DensifyConfig& config,
                                double position_lr, std::mt19937_64& rng) {
  const std::size_t n = scene.size();
  DensifyResult out;
  if (stats.visible_count.size() != n) throw ContractViolation("densify_and_prune: stats sized for another scene");
  const double split_scale = config.split_scale_fraction * scene.bounds().diagonal();
  const float shrink = static_cast<float>(std::log(config.split_factor));

  std::vector<Gaussian> kept, born;
  std::vector<std::int64_t> new_to_old;
  std::vector<std::int64_t> old_to_new(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const Gaussian& g = scene.gaussians[i];
    if (!g.aux.label) {
      old_to_new[i] = static_cast<std::int64_t>(kept.size());
      new_to_old.push_back(static_cast<std::int64_t>(i));
      kept.push_back(g);
      continue;
    }
    if (g.params.opacity() < config.prune_opacity) {
      ++out.pruned;
      continue;
    }
    const bool hot = stats.mean_screen_norm(i) > config.grad_threshold;
    const double max_scale = std::exp(static_cast<double>(g.params.log_scale.maxCoeff()));
    if (hot && max_scale >= split_scale) {
      const Eigen::Matrix3d r = rotation_matrix(g.params.rotation.cast<double>());
      const Eigen::Vector3d s = g.params.log_scale.cast<double>().array().exp();
      for (int c = 0; c < 2; ++c) {
        Gaussian child = g;
        const Eigen::Vector3d offset = r * s.cwiseProduct(unit_ball(rng));
        child.params.position = (g.params.position.cast<double>() + offset).cast<float>();
        child.params.log_scale = g.params.log_scale.array() - shrink;
        child.aux.generation = scene.current_generation;
        child.aux.label = true;
        born.push_back(child);
      }
      ++out.split;
      continue;
    }
    old_to_new[i] = static_cast<std::int64_t>(kept.size());
    new_to_old.push_back(static_cast<std::int64_t>(i));
    kept.push_back(g);
    if (hot) {
      Gaussian clone = g;
      clone.params.position =
          (g.params.position.cast<double>() - position_lr * stats.mean_position_grad(i)).cast<float>();
      clone.aux.generation = scene.current_generation;
      clone.aux.label = true;
      born.push_back(clone);
      ++out.cloned;
    }
  }
  for (auto& b : born) {
    kept.push_back(std::move(b));
    new_to_old.push_back(-1);
  }
  scene.gaussians = std::move(kept);
  out.remap.old_to_new = std::move(old_to_new);
  out.remap.new_to_old = std::move(new_to_old);
  return out;
}

}  // namespace gsedit

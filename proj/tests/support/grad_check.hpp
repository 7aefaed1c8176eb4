#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gsedit/rasterizer.hpp"

namespace gsedit::test {

/// sum_p dl(p) . C(p) with C rebuilt from the contribution records in double
/// precision: C = sum_i c_i sigma_i T_i.
inline double linear_loss(const RenderOutput& r, const ImageBuffer& dl) {
  double loss = 0.0;
  for (std::size_t p = 0; p < r.image.pixel_count(); ++p) {
    for (const auto& rec : r.pixel_records(p)) {
      const auto& c = r.splats[rec.splat].color;
      const double m = rec.sigma * rec.transmittance;
      loss += m * (dl.data[p * 3] * c[0] + dl.data[p * 3 + 1] * c[1] + dl.data[p * 3 + 2] * c[2]);
    }
  }
  return loss;
}

/// Pointer to raw float parameter k (0..13) of a Gaussian, in the order
/// position(3), log_scale(3), rotation(4), opacity_logit, color(3).
inline float* raw_param(GaussianParams& p, int k) {
  if (k < 3) return &p.position[k];
  if (k < 6) return &p.log_scale[k - 3];
  if (k < 10) return &p.rotation[k - 6];
  if (k == 10) return &p.opacity_logit;
  return &p.color[k - 11];
}

inline double analytic_param(const ParamGradients& g, std::size_t i, int k) {
  if (k < 3) return g.position[i][k];
  if (k < 6) return g.log_scale[i][k - 3];
  if (k < 10) return g.rotation[i][k - 6];
  if (k == 10) return g.opacity_logit[i];
  return g.color[i][k - 11];
}

inline const char* param_name(int k) {
  static const char* names[] = {"pos.x", "pos.y", "pos.z", "ls.0", "ls.1", "ls.2", "q.w",
                                "q.x",   "q.y",   "q.z",   "opac", "c.r",  "c.g",  "c.b"};
  return names[k];
}

struct GradMismatch {
  std::size_t gaussian;
  int param;
  double analytic, numeric, rel;
};

/// Central differences with step h on every raw parameter, dividing by the
/// step actually realized in float. Reports coordinates with |grad| > floor
/// whose relative error exceeds tol. Also returns the worst relative error.
inline std::vector<GradMismatch> check_raster_gradients(const GaussianScene& scene, const Camera& cam,
                                                        const ImageBuffer& dl, double h, double floor,
                                                        double tol, double* worst = nullptr) {
  const RenderOutput base = render(scene, cam);
  const ParamGradients g = rasterize_backward(base, dl, scene, cam);
  std::vector<GradMismatch> bad;
  double worst_rel = 0.0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    for (int k = 0; k < 14; ++k) {
      GaussianScene plus = scene, minus = scene;
      float* vp = raw_param(plus.gaussians[i].params, k);
      float* vm = raw_param(minus.gaussians[i].params, k);
      *vp = static_cast<float>(*vp + h);
      *vm = static_cast<float>(*vm - h);
      const double step = static_cast<double>(*vp) - static_cast<double>(*vm);
      const double numeric = (linear_loss(render(plus, cam), dl) - linear_loss(render(minus, cam), dl)) / step;
      const double analytic = analytic_param(g, i, k);
      if (std::abs(analytic) <= floor && std::abs(numeric) <= floor) continue;
      const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
      worst_rel = std::max(worst_rel, rel);
      if (rel >= tol) bad.push_back({i, k, analytic, numeric, rel});
    }
  }
  if (worst) *worst = worst_rel;
  return bad;
}

}  // namespace gsedit::test

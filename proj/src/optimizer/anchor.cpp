#include <cmath>

#include "gsedit/errors.hpp"
#include "gsedit/optimizer.hpp"

namespace gsedit {

AnchorLoss anchor_loss(const GaussianScene& scene, const std::vector<AnchorSnapshot>& anchors,
                       double lambda_growth) {
  if (anchors.empty()) throw ContractViolation("anchor_loss: no snapshots");
  AnchorLoss out;
  out.gradients.resize(scene.size());
  double lambda = 1.0;
  for (const AnchorSnapshot& snap : anchors) {
    const std::size_t n = std::min(scene.size(), snap.index_map.size());
    for (std::size_t g = 0; g < n; ++g) {
      const std::int64_t s = snap.index_map[g];
      if (s < 0) continue;
      const GaussianParams& p = scene.gaussians[g].params;
      const GaussianParams& a = snap.params[s];
      const Eigen::Vector3d dp = (p.position - a.position).cast<double>();
      const Eigen::Vector3d ds = (p.log_scale - a.log_scale).cast<double>();
      const Eigen::Vector4d dq = (p.rotation - a.rotation).cast<double>();
      const double da = static_cast<double>(p.opacity_logit) - a.opacity_logit;
      const Eigen::Vector3d dc = (p.color - a.color).cast<double>();
      out.values.position += lambda * dp.squaredNorm();
      out.values.log_scale += lambda * ds.squaredNorm();
      out.values.rotation += lambda * dq.squaredNorm();
      out.values.opacity += lambda * da * da;
      out.values.color += lambda * dc.squaredNorm();
      out.gradients.position[g] += 2.0 * lambda * dp;
      out.gradients.log_scale[g] += 2.0 * lambda * ds;
      out.gradients.rotation[g] += 2.0 * lambda * dq;
      out.gradients.opacity_logit[g] += 2.0 * lambda * da;
      out.gradients.color[g] += 2.0 * lambda * dc;
    }
    lambda *= lambda_growth;
  }
  return out;
}

void add_scaled(ParamGradients& into, const ParamGradients& g, const GroupScalars& scale) {
  if (into.size() != g.size()) throw ContractViolation("add_scaled: size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    into.position[i] += scale.position * g.position[i];
    into.log_scale[i] += scale.log_scale * g.log_scale[i];
    into.rotation[i] += scale.rotation * g.rotation[i];
    into.opacity_logit[i] += scale.opacity * g.opacity_logit[i];
    into.color[i] += scale.color * g.color[i];
  }
}

void gate_gradients(ParamGradients& grads, const GaussianScene& scene) {
  if (grads.size() != scene.size()) throw ContractViolation("gate_gradients: size mismatch");
  for (std::size_t i = 0; i < scene.size(); ++i)
    if (!scene.gaussians[i].aux.label) grads.zero_gaussian(i);
}

}  // namespace gsedit

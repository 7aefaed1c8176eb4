#include "gsedit/scene.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace gsedit {

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

float logit(float p) { return std::log(p / (1.0f - p)); }

float GaussianParams::opacity() const { return sigmoid(opacity_logit); }

Aabb GaussianScene::bounds() const {
  Aabb box;
  if (gaussians.empty()) return box;
  box.min = box.max = gaussians.front().params.position;
  for (const auto& g : gaussians) {
    box.min = box.min.cwiseMin(g.params.position);
    box.max = box.max.cwiseMax(g.params.position);
  }
  return box;
}

std::size_t GaussianScene::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(gaussians.begin(), gaussians.end(), [](const Gaussian& g) { return g.aux.label; }));
}

IndexRemap IndexRemap::identity(std::size_t n) {
  IndexRemap r;
  r.old_to_new.resize(n);
  r.new_to_old.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.old_to_new[i] = r.new_to_old[i] = static_cast<std::int64_t>(i);
  return r;
}

bool IndexRemap::is_identity() const {
  if (old_to_new.size() != new_to_old.size()) return false;
  for (std::size_t i = 0; i < new_to_old.size(); ++i)
    if (new_to_old[i] != static_cast<std::int64_t>(i) || old_to_new[i] != static_cast<std::int64_t>(i))
      return false;
  return true;
}

void AnchorSnapshot::apply(const IndexRemap& remap) {
  std::vector<std::int64_t> next(remap.new_to_old.size(), -1);
  for (std::size_t i = 0; i < next.size(); ++i) {
    const std::int64_t old = remap.new_to_old[i];
    if (old >= 0 && static_cast<std::size_t>(old) < index_map.size()) next[i] = index_map[old];
  }
  index_map = std::move(next);
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q_raw) {
  const Eigen::Vector4d q = q_raw / q_raw.norm();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Eigen::Matrix3d covariance(const GaussianParams& params) {
  const Eigen::Matrix3d r = rotation_matrix(params.rotation.cast<double>());
  const Eigen::Vector3d var = (2.0 * params.log_scale.cast<double>()).array().exp();
  Eigen::Matrix3d cov = r * var.asDiagonal() * r.transpose();
  // Symmetrize away rounding so callers can rely on exact symmetry.
  return 0.5 * (cov + cov.transpose());
}

AnchorSnapshot snapshot_anchor(GaussianScene& scene) {
  AnchorSnapshot snap;
  snap.generation = scene.current_generation++;
  snap.params.reserve(scene.size());
  for (const auto& g : scene.gaussians) snap.params.push_back(g.params);
  snap.index_map.resize(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) snap.index_map[i] = static_cast<std::int64_t>(i);
  return snap;
}

}  // namespace gsedit

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace gsedit {

/// Optimizable parameters of one Gaussian. Covariance is kept factored as
/// rotation (wxyz quaternion) and per-axis log std-dev; opacity as a logit.
struct GaussianParams {
  Eigen::Vector3f position = Eigen::Vector3f::Zero();
  Eigen::Vector3f log_scale = Eigen::Vector3f::Zero();
  Eigen::Vector4f rotation{1.0f, 0.0f, 0.0f, 0.0f};
  float opacity_logit = 0.0f;
  Eigen::Vector3f color = Eigen::Vector3f::Zero();

  float opacity() const;
  bool operator==(const GaussianParams&) const = default;
};

struct GaussianAux {
  bool label = false;
  float backproj_weight = 0.0f;
  std::int32_t generation = 0;

  bool operator==(const GaussianAux&) const = default;
};

struct Gaussian {
  GaussianParams params;
  GaussianAux aux;

  bool operator==(const Gaussian&) const = default;
};

struct Aabb {
  Eigen::Vector3f min = Eigen::Vector3f::Zero();
  Eigen::Vector3f max = Eigen::Vector3f::Zero();
  float diagonal() const { return (max - min).norm(); }
};

/// Ordered Gaussian list; the index is a Gaussian's identity within a run.
struct GaussianScene {
  std::vector<Gaussian> gaussians;
  /// Generation that the next anchor snapshot will carry.
  std::int32_t current_generation = 0;

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
  Aabb bounds() const;
  std::size_t labeled_count() const;
};

/// Old-to-new index mapping produced by densification. -1 marks a removed
/// (old_to_new) or newly born (new_to_old) Gaussian.
struct IndexRemap {
  std::vector<std::int64_t> old_to_new;
  std::vector<std::int64_t> new_to_old;

  static IndexRemap identity(std::size_t n);
  bool is_identity() const;
};

/// Saved parameter generation used by the anchor loss.
struct AnchorSnapshot {
  std::int32_t generation = 0;
  std::vector<GaussianParams> params;
  /// current index -> snapshot index, -1 when the Gaussian was born later.
  std::vector<std::int64_t> index_map;

  /// Carries the map through a densification remap.
  void apply(const IndexRemap& remap);
};

/// R diag(exp(2 log_scale)) R^T with R from the normalized quaternion.
Eigen::Matrix3d covariance(const GaussianParams& params);

/// Rotation matrix of a wxyz quaternion (normalized internally).
Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q);

float sigmoid(float x);
float logit(float p);

/// Deep-copies parameters and bumps scene.current_generation.
AnchorSnapshot snapshot_anchor(GaussianScene& scene);

GaussianScene load_scene(const std::string& path);
void save_scene(const GaussianScene& scene, const std::string& path);

}  // namespace gsedit

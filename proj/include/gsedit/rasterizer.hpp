#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "gsedit/camera.hpp"
#include "gsedit/image.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

/// Screen-space isotropic blur added to every projected covariance (px^2).
inline constexpr double kBlurFloor = 0.3;
/// Upper clamp on a splat's per-pixel opacity.
inline constexpr double kMaxSigma = 0.999;
/// Compositing stops once transmittance drops below this.
inline constexpr double kMinTransmittance = 1e-4;

struct Splat2D {
  Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d conic = Eigen::Matrix2d::Identity();  // cov2d^-1
  double depth = 0.0;
  std::uint32_t gaussian_index = 0;
  Eigen::Vector3d camera_position = Eigen::Vector3d::Zero();
  double opacity = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

/// Culls Gaussians outside the clip range or the image guard band and returns
/// the rest sorted front to back (depth ties broken by Gaussian index).
std::vector<Splat2D> project(const GaussianScene& scene, const Camera& camera);

struct ContribRecord {
  std::uint32_t splat = 0;           // index into RenderOutput::splats
  std::uint32_t gaussian_index = 0;
  double sigma = 0.0;
  double transmittance = 0.0;        // T before this splat
};

struct RenderOutput {
  ImageBuffer image;                        // RGB, black background
  std::vector<double> final_transmittance;  // one per pixel
  std::vector<std::uint32_t> record_offsets;  // pixel p owns [offsets[p], offsets[p+1])
  std::vector<ContribRecord> records;
  std::vector<Splat2D> splats;
  std::size_t gaussian_count = 0;

  std::span<const ContribRecord> pixel_records(std::size_t pixel) const {
    return {records.data() + record_offsets[pixel], records.data() + record_offsets[pixel + 1]};
  }
};

/// Front-to-back alpha compositing of depth-sorted splats.
RenderOutput rasterize(std::vector<Splat2D> splats, const GaussianScene& scene, const Camera& camera);

/// project + rasterize.
RenderOutput render(const GaussianScene& scene, const Camera& camera);

struct ParamGradients {
  std::vector<Eigen::Vector3d> position;
  std::vector<Eigen::Vector3d> log_scale;
  std::vector<Eigen::Vector4d> rotation;
  std::vector<double> opacity_logit;
  std::vector<Eigen::Vector3d> color;
  /// dL/d(mean2d), kept for densification statistics.
  std::vector<Eigen::Vector2d> screen_position;

  explicit ParamGradients(std::size_t n = 0) { resize(n); }
  void resize(std::size_t n);
  std::size_t size() const { return position.size(); }
  void zero_gaussian(std::size_t i);
  ParamGradients& operator+=(const ParamGradients& other);
  bool all_finite() const;
};

/// Analytic gradient of sum(dL_dImage * image) with respect to every Gaussian
/// parameter, chained through the projection. The render must come from the
/// same scene and camera.
ParamGradients rasterize_backward(const RenderOutput& render, const ImageBuffer& dL_dImage,
                                  const GaussianScene& scene, const Camera& camera);

/// Per-Gaussian rendered mass: inside the mask and in total.
struct ContributionStats {
  std::vector<double> inside;
  std::vector<double> total;
};
ContributionStats contribution_stats(const RenderOutput& render, const MaskBuffer& mask);

/// Fraction of each Gaussian's visible contribution that lands in the mask;
/// 0 for Gaussians that are invisible in this view.
std::vector<double> contribution_weights(const RenderOutput& render, const MaskBuffer& mask);

}  // namespace gsedit

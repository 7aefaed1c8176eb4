#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "gsedit/rasterizer.hpp"

namespace gsedit {

std::vector<Splat2D> project(const GaussianScene& scene, const Camera& camera) {
  const Eigen::Matrix3d w = camera.rotation();
  const Eigen::Vector3d tc = camera.translation();
  std::vector<Splat2D> out;
  out.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const GaussianParams& p = scene.gaussians[i].params;
    const Eigen::Vector3d t = w * p.position.cast<double>() + tc;
    if (!(t.z() > camera.near) || !(t.z() < camera.far)) continue;

    const double iz = 1.0 / t.z();
    Eigen::Matrix<double, 2, 3> jac;
    jac << camera.fx * iz, 0.0, -camera.fx * t.x() * iz * iz,
           0.0, camera.fy * iz, -camera.fy * t.y() * iz * iz;
    const Eigen::Matrix3d cov_cam = w * covariance(p) * w.transpose();
    Eigen::Matrix2d cov2d = jac * cov_cam * jac.transpose();
    cov2d(0, 1) = cov2d(1, 0) = 0.5 * (cov2d(0, 1) + cov2d(1, 0));
    cov2d += kBlurFloor * Eigen::Matrix2d::Identity();

    Splat2D s;
    s.mean2d = {camera.fx * t.x() * iz + camera.cx, camera.fy * t.y() * iz + camera.cy};
    s.cov2d = cov2d;
    const double det = cov2d.determinant();
    s.conic << cov2d(1, 1) / det, -cov2d(0, 1) / det, -cov2d(1, 0) / det, cov2d(0, 0) / det;
    s.depth = t.z();
    s.gaussian_index = static_cast<std::uint32_t>(i);
    s.camera_position = t;
    s.opacity = 1.0 / (1.0 + std::exp(-static_cast<double>(p.opacity_logit)));
    s.color = p.color.cast<double>();

    // Guard band: drop splats whose 3-sigma footprint misses the image.
    const double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    const double radius = 3.0 * std::sqrt(lambda_max);
    if (s.mean2d.x() + radius < 0.0 || s.mean2d.x() - radius > camera.width - 1 ||
        s.mean2d.y() + radius < 0.0 || s.mean2d.y() - radius > camera.height - 1)
      continue;
    out.push_back(s);
  }
  std::stable_sort(out.begin(), out.end(), [](const Splat2D& a, const Splat2D& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.gaussian_index < b.gaussian_index;
  });
  return out;
}

}  // namespace gsedit

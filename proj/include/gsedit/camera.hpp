#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace gsedit {

/// Pinhole camera. Camera space is +z forward, +x right, +y down; pixel (u, v)
/// is sampled at the continuous coordinate (u, v).
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();
  double near = 0.01, far = 100.0;

  Eigen::Matrix3d rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return world_to_camera.topRightCorner<3, 1>(); }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const {
    return rotation() * world + translation();
  }
  Eigen::Vector3d center() const { return -rotation().transpose() * translation(); }

  /// Throws DataError when the rotation block is not orthonormal (1e-5) or
  /// the clip range / image size is invalid.
  void validate() const;
};

/// Camera at `eye` looking at `target`, y-down image convention.
Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
               const Eigen::Vector3d& world_up, int width, int height, double focal);

std::vector<Camera> load_cameras(const std::string& path);
void save_cameras(const std::vector<Camera>& cameras, const std::string& path);

}  // namespace gsedit

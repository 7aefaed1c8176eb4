#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

#include "gsedit/camera.hpp"
#include "gsedit/scene.hpp"

namespace gsedit::test {

/// Camera at the origin looking down +z.
inline Camera axis_camera(int width, int height, double focal) {
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.near = 0.1;
  cam.far = 100.0;
  return cam;
}

inline Gaussian make_gaussian(Eigen::Vector3f pos, float scale, float alpha, Eigen::Vector3f color) {
  Gaussian g;
  g.params.position = pos;
  g.params.log_scale = Eigen::Vector3f::Constant(std::log(scale));
  g.params.opacity_logit = logit(alpha);
  g.params.color = color;
  return g;
}

inline Eigen::Vector4f random_unit_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  Eigen::Vector4f q(n(rng), n(rng), n(rng), n(rng));
  return q / q.norm();
}

/// Gaussians in front of axis_camera(size, size, focal) at depth 3..5, well
/// inside the frame, moderate opacity.
inline GaussianScene random_scene(std::mt19937_64& rng, int count, int size, double focal) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  GaussianScene scene;
  for (int i = 0; i < count; ++i) {
    Gaussian g;
    const float z = 3.0f + 2.0f * u(rng);
    const float half = 0.25f * size * z / static_cast<float>(focal);
    g.params.position = {(2 * u(rng) - 1) * half, (2 * u(rng) - 1) * half, z};
    g.params.log_scale = {std::log(0.08f + 0.2f * u(rng)), std::log(0.08f + 0.2f * u(rng)),
                          std::log(0.08f + 0.2f * u(rng))};
    g.params.rotation = random_unit_quaternion(rng);
    g.params.opacity_logit = logit(0.15f + 0.7f * u(rng));
    g.params.color = {u(rng), u(rng), u(rng)};
    scene.gaussians.push_back(g);
  }
  return scene;
}

}  // namespace gsedit::test

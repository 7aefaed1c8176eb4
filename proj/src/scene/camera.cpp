#include "gsedit/camera.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "gsedit/errors.hpp"

namespace gsedit {

using nlohmann::json;

void Camera::validate() const {
  const Eigen::Matrix3d r = rotation();
  if (!((r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-5))
    throw DataError("camera rotation block is not orthonormal");
  if (!(near > 0.0) || !(far > near)) throw DataError("camera requires 0 < near < far");
  if (width <= 0 || height <= 0) throw DataError("camera image size must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw DataError("camera focal lengths must be positive");
}

Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
               const Eigen::Vector3d& world_up, int width, int height, double focal) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d right = forward.cross(world_up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Camera cam;
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  cam.world_to_camera.setIdentity();
  cam.world_to_camera.topLeftCorner<3, 3>() = r;
  cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

std::vector<Camera> load_cameras(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open camera file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("camera file " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw DataError("camera file must hold a JSON array: " + path);
  std::vector<Camera> cams;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& j = doc[i];
    try {
      Camera c;
      c.fx = j.at("fx").get<double>();
      c.fy = j.at("fy").get<double>();
      c.cx = j.at("cx").get<double>();
      c.cy = j.at("cy").get<double>();
      c.width = j.at("width").get<int>();
      c.height = j.at("height").get<int>();
      c.near = j.at("near").get<double>();
      c.far = j.at("far").get<double>();
      const auto& m = j.at("world_to_camera");
      if (!m.is_array() || m.size() != 16) throw DataError("world_to_camera must have 16 entries");
      for (int k = 0; k < 16; ++k) c.world_to_camera(k / 4, k % 4) = m[k].get<double>();
      c.validate();
      cams.push_back(c);
    } catch (const json::exception& e) {
      throw DataError("camera " + std::to_string(i) + " in " + path + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("camera " + std::to_string(i) + " in " + path + ": " + e.what());
    }
  }
  return cams;
}

void save_cameras(const std::vector<Camera>& cameras, const std::string& path) {
  json doc = json::array();
  for (const auto& c : cameras) {
    json m = json::array();
    for (int k = 0; k < 16; ++k) m.push_back(c.world_to_camera(k / 4, k % 4));
    doc.push_back({{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
                   {"width", c.width}, {"height", c.height}, {"world_to_camera", m},
                   {"near", c.near}, {"far", c.far}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write camera file: " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace gsedit

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "footprint.hpp"
#include "gsedit/errors.hpp"
#include "gsedit/parallel.hpp"
#include "gsedit/rasterizer.hpp"

namespace gsedit {

void ParamGradients::resize(std::size_t n) {
  position.assign(n, Eigen::Vector3d::Zero());
  log_scale.assign(n, Eigen::Vector3d::Zero());
  rotation.assign(n, Eigen::Vector4d::Zero());
  opacity_logit.assign(n, 0.0);
  color.assign(n, Eigen::Vector3d::Zero());
  screen_position.assign(n, Eigen::Vector2d::Zero());
}

void ParamGradients::zero_gaussian(std::size_t i) {
  position[i].setZero();
  log_scale[i].setZero();
  rotation[i].setZero();
  opacity_logit[i] = 0.0;
  color[i].setZero();
  screen_position[i].setZero();
}

ParamGradients& ParamGradients::operator+=(const ParamGradients& o) {
  if (o.size() != size()) throw ContractViolation("gradient sets differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    position[i] += o.position[i];
    log_scale[i] += o.log_scale[i];
    rotation[i] += o.rotation[i];
    opacity_logit[i] += o.opacity_logit[i];
    color[i] += o.color[i];
    screen_position[i] += o.screen_position[i];
  }
  return *this;
}

bool ParamGradients::all_finite() const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (!position[i].allFinite() || !log_scale[i].allFinite() || !rotation[i].allFinite() ||
        !std::isfinite(opacity_logit[i]) || !color[i].allFinite())
      return false;
  }
  return true;
}

namespace {

// Screen-space gradient of one splat.
struct SplatGrad {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  double conic00 = 0.0, conic01 = 0.0, conic11 = 0.0;  // full-matrix convention
  double opacity = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();

  void add(const SplatGrad& o) {
    mean += o.mean;
    conic00 += o.conic00;
    conic01 += o.conic01;
    conic11 += o.conic11;
    opacity += o.opacity;
    color += o.color;
  }
};

constexpr int kRowsPerBlock = 8;

// dR/dq for each quaternion component (w, x, y, z) of a unit quaternion.
std::array<Eigen::Matrix3d, 4> rotation_jacobian(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Eigen::Matrix3d, 4> d;
  d[0] << 0, -2 * z, 2 * y,
          2 * z, 0, -2 * x,
          -2 * y, 2 * x, 0;
  d[1] << 0, 2 * y, 2 * z,
          2 * y, -4 * x, -2 * w,
          2 * z, 2 * w, -4 * x;
  d[2] << -4 * y, 2 * x, 2 * w,
          2 * x, 0, 2 * z,
          -2 * w, 2 * z, -4 * y;
  d[3] << -4 * z, -2 * w, 2 * x,
          2 * w, -4 * z, 2 * y,
          2 * x, 2 * y, 0;
  return d;
}

}  // namespace

ParamGradients rasterize_backward(const RenderOutput& render, const ImageBuffer& dL_dImage,
                                  const GaussianScene& scene, const Camera& camera) {
  if (!dL_dImage.same_shape(render.image))
    throw ContractViolation("dL/dImage shape differs from the rendered image");
  if (render.gaussian_count != scene.size())
    throw ContractViolation("render was produced from a different scene");
  if (render.image.width != camera.width || render.image.height != camera.height)
    throw ContractViolation("render was produced with a different camera");

  const int w = camera.width, h = camera.height;
  const std::size_t n_splats = render.splats.size();
  const int n_blocks = (h + kRowsPerBlock - 1) / kRowsPerBlock;
  std::vector<std::vector<SplatGrad>> blocks(static_cast<std::size_t>(n_blocks));

  parallel_for(n_blocks, [&](int b) {
    auto& acc = blocks[b];
    acc.assign(n_splats, SplatGrad{});
    Eigen::Vector2d d;
    const int y_end = std::min(h, (b + 1) * kRowsPerBlock);
    for (int y = b * kRowsPerBlock; y < y_end; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        const Eigen::Vector3d g(dL_dImage.data[p * 3], dL_dImage.data[p * 3 + 1], dL_dImage.data[p * 3 + 2]);
        if (g.isZero(0.0)) continue;
        const auto recs = render.pixel_records(p);
        Eigen::Vector3d behind = Eigen::Vector3d::Zero();  // sum of c*sigma*T over later splats
        for (std::size_t k = recs.size(); k-- > 0;) {
          const ContribRecord& r = recs[k];
          const Splat2D& sp = render.splats[r.splat];
          SplatGrad& sg = acc[r.splat];
          const double weight = r.sigma * r.transmittance;
          sg.color += g * weight;
          const double dsigma = g.dot(sp.color * r.transmittance - behind / (1.0 - r.sigma));
          behind += sp.color * weight;

          const double raw = detail::raw_sigma(sp, x, y, d);
          if (raw > kMaxSigma) continue;  // clamped: flat in every parameter
          sg.opacity += dsigma * (raw / sp.opacity);
          const double gs = dsigma * raw;
          sg.mean += gs * (sp.conic * d);
          sg.conic00 += -0.5 * gs * d.x() * d.x();
          sg.conic01 += -0.5 * gs * d.x() * d.y();
          sg.conic11 += -0.5 * gs * d.y() * d.y();
        }
      }
    }
  });

  std::vector<SplatGrad> total(n_splats);
  for (const auto& blk : blocks)
    for (std::size_t s = 0; s < n_splats; ++s) total[s].add(blk[s]);

  ParamGradients grads(scene.size());
  const Eigen::Matrix3d wr = camera.rotation();
  parallel_for(static_cast<int>(n_splats), [&](int si) {
    const Splat2D& sp = render.splats[si];
    const SplatGrad& sg = total[si];
    const std::size_t gi = sp.gaussian_index;
    const GaussianParams& p = scene.gaussians[gi].params;

    grads.color[gi] = sg.color;
    grads.screen_position[gi] = sg.mean;
    const double alpha = sp.opacity;
    grads.opacity_logit[gi] = sg.opacity * alpha * (1.0 - alpha);

    // conic = cov2d^-1  =>  dL/dcov2d = -conic * dL/dconic * conic
    Eigen::Matrix2d g_conic;
    g_conic << sg.conic00, sg.conic01, sg.conic01, sg.conic11;
    const Eigen::Matrix2d g_cov2d = -sp.conic * g_conic * sp.conic;

    const Eigen::Vector3d& t = sp.camera_position;
    const double iz = 1.0 / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Eigen::Matrix<double, 2, 3> jac;
    jac << camera.fx * iz, 0.0, -camera.fx * t.x() * iz2,
           0.0, camera.fy * iz, -camera.fy * t.y() * iz2;

    const Eigen::Vector4d q_raw = p.rotation.cast<double>();
    const double q_norm = q_raw.norm();
    const Eigen::Vector4d q = q_raw / q_norm;
    const Eigen::Matrix3d rot = rotation_matrix(q);
    const Eigen::Vector3d var = (2.0 * p.log_scale.cast<double>()).array().exp();
    const Eigen::Matrix3d cov3d = rot * var.asDiagonal() * rot.transpose();
    const Eigen::Matrix3d cov_cam = wr * cov3d * wr.transpose();

    // cov2d = J cov_cam J^T + blur
    const Eigen::Matrix3d g_cov_cam = jac.transpose() * g_cov2d * jac;
    const Eigen::Matrix<double, 2, 3> g_jac = 2.0 * g_cov2d * jac * cov_cam;
    const Eigen::Matrix3d g_cov3d = wr.transpose() * g_cov_cam * wr;

    // cov3d = R diag(var) R^T
    const Eigen::Matrix3d g_rot = 2.0 * g_cov3d * rot * var.asDiagonal();
    const Eigen::Matrix3d g_diag = rot.transpose() * g_cov3d * rot;
    for (int k = 0; k < 3; ++k) grads.log_scale[gi][k] = g_diag(k, k) * 2.0 * var[k];

    const auto dr = rotation_jacobian(q);
    Eigen::Vector4d g_q;
    for (int k = 0; k < 4; ++k) g_q[k] = (g_rot.array() * dr[k].array()).sum();
    grads.rotation[gi] = (g_q - q * q.dot(g_q)) / q_norm;

    // Camera-space position through the projected mean and the Jacobian.
    Eigen::Vector3d g_t;
    g_t.x() = sg.mean.x() * camera.fx * iz + g_jac(0, 2) * (-camera.fx * iz2);
    g_t.y() = sg.mean.y() * camera.fy * iz + g_jac(1, 2) * (-camera.fy * iz2);
    g_t.z() = sg.mean.x() * (-camera.fx * t.x() * iz2) + sg.mean.y() * (-camera.fy * t.y() * iz2) +
              g_jac(0, 0) * (-camera.fx * iz2) + g_jac(0, 2) * (2.0 * camera.fx * t.x() * iz3) +
              g_jac(1, 1) * (-camera.fy * iz2) + g_jac(1, 2) * (2.0 * camera.fy * t.y() * iz3);
    grads.position[gi] = wr.transpose() * g_t;
  });
  return grads;
}

}  // namespace gsedit

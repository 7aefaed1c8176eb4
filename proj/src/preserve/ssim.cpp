#include <array>
#include <cmath>
#include <vector>

#include "gsedit/errors.hpp"
#include "gsedit/preserve.hpp"

namespace gsedit {

namespace {

constexpr int kRadius = 5;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, 2 * kRadius + 1>& window() {
  static const auto w = [] {
    std::array<double, 2 * kRadius + 1> k{};
    double sum = 0.0;
    for (int i = -kRadius; i <= kRadius; ++i) sum += k[i + kRadius] = std::exp(-(i * i) / (2.0 * kSigma * kSigma));
    for (auto& v : k) v /= sum;
    return k;
  }();
  return w;
}

using Plane = std::vector<double>;

// Separable Gaussian filter with zero padding. The kernel is symmetric, so the
// same routine is its own adjoint.
Plane blur(const Plane& in, int w, int h) {
  const auto& k = window();
  Plane tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -kRadius; i <= kRadius; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) s += k[i + kRadius] * in[y * w + xx];
      }
      tmp[y * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -kRadius; i <= kRadius; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) s += k[i + kRadius] * tmp[yy * w + x];
      }
      out[y * w + x] = s;
    }
  return out;
}

Plane channel(const ImageBuffer& img, int c) {
  Plane p(img.pixel_count());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * img.channels + c];
  return p;
}

}  // namespace

SsimResult ssim(const ImageBuffer& a, const ImageBuffer& b, bool with_gradient, bool with_map) {
  if (!a.same_shape(b)) throw ContractViolation("ssim: image shapes differ");
  SsimResult out;
  if (a.data.empty()) {
    out.ssim = 1.0;
    if (with_gradient) out.gradient = ImageBuffer(a.width, a.height, a.channels);
    if (with_map) out.map = ImageBuffer(a.width, a.height, a.channels);
    return out;
  }
  const int w = a.width, h = a.height;
  const std::size_t n = a.pixel_count();
  const double norm = 1.0 / static_cast<double>(a.data.size());
  if (with_gradient) out.gradient = ImageBuffer(w, h, a.channels);
  if (with_map) out.map = ImageBuffer(w, h, a.channels);

  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    const Plane x = channel(a, c), y = channel(b, c);
    Plane xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const Plane mx = blur(x, w, h), my = blur(y, w, h);
    const Plane exx = blur(xx, w, h), eyy = blur(yy, w, h), exy = blur(xy, w, h);

    Plane d_mx, d_exx, d_exy;
    if (with_gradient) d_mx = d_exx = d_exy = Plane(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double a1 = 2.0 * mx[i] * my[i] + kC1;
      const double a2 = 2.0 * (exy[i] - mx[i] * my[i]) + kC2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + kC1;
      const double b2 = (exx[i] - mx[i] * mx[i]) + (eyy[i] - my[i] * my[i]) + kC2;
      const double den = b1 * b2;
      const double s = a1 * a2 / den;
      total += s;
      if (with_map) out.map.data[i * a.channels + c] = static_cast<float>(s);
      if (with_gradient) {
        d_mx[i] = (2.0 * my[i] * (a2 - a1) - s * 2.0 * mx[i] * (b2 - b1)) / den;
        d_exx[i] = -s / b2;
        // a1 / b1 first so that the E[xx] and E[xy] terms cancel exactly when a == b.
        d_exy[i] = 2.0 * (a1 / b1) / b2;
      }
    }
    if (with_gradient) {
      const Plane g1 = blur(d_mx, w, h), g2 = blur(d_exx, w, h), g3 = blur(d_exy, w, h);
      for (std::size_t i = 0; i < n; ++i)
        out.gradient.data[i * a.channels + c] =
            static_cast<float>(norm * (g1[i] + 2.0 * x[i] * g2[i] + y[i] * g3[i]));
    }
  }
  out.ssim = total * norm;
  return out;
}

double dssim(const ImageBuffer& a, const ImageBuffer& b) { return 0.5 * (1.0 - ssim(a, b).ssim); }

}  // namespace gsedit

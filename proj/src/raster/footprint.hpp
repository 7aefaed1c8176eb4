#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gsedit/rasterizer.hpp"

namespace gsedit::detail {

/// Splat contributions below this are treated as exactly zero.
inline constexpr double kSigmaFloor = 1e-12;

struct RowSpan {
  int y0, y1;  // inclusive pixel rows
  int x0, x1;  // inclusive pixel columns
};

/// Pixel rectangle outside which alpha * exp(-q/2) < kSigmaFloor.
inline RowSpan footprint(const Splat2D& s, int width, int height) {
  RowSpan r{1, 0, 1, 0};
  if (!(s.opacity > kSigmaFloor)) return r;
  const double q = 2.0 * std::log(s.opacity / kSigmaFloor);
  const double rx = std::sqrt(q * s.cov2d(0, 0));
  const double ry = std::sqrt(q * s.cov2d(1, 1));
  r.x0 = std::max(0, static_cast<int>(std::floor(s.mean2d.x() - rx)));
  r.x1 = std::min(width - 1, static_cast<int>(std::ceil(s.mean2d.x() + rx)));
  r.y0 = std::max(0, static_cast<int>(std::floor(s.mean2d.y() - ry)));
  r.y1 = std::min(height - 1, static_cast<int>(std::ceil(s.mean2d.y() + ry)));
  return r;
}

/// Unclamped sigma of a splat at pixel (x, y) and the offset d = pixel - mean.
inline double raw_sigma(const Splat2D& s, double x, double y, Eigen::Vector2d& d) {
  d = Eigen::Vector2d(x, y) - s.mean2d;
  const double power = -0.5 * d.dot(s.conic * d);
  return s.opacity * std::exp(power);
}

}  // namespace gsedit::detail

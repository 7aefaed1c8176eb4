#pragma once

#include "gsedit/image.hpp"

namespace gsedit {

/// One scalar per Gaussian parameter group.
struct GroupScalars {
  double position = 0.0;
  double log_scale = 0.0;
  double rotation = 0.0;
  double opacity = 0.0;
  double color = 0.0;

  double dot(const GroupScalars& o) const {
    return position * o.position + log_scale * o.log_scale + rotation * o.rotation +
           opacity * o.opacity + color * o.color;
  }
  bool all_finite() const;
};

struct LossWeights {
  double lambda_sds = 1.0;
  double lambda_l1 = 0.8;
  double lambda_ssim = 0.2;
  GroupScalars lambda_anchor{1e-5, 1e-5, 1e-5, 1e-5, 1e-5};

  /// Throws ConfigError on negative or non-finite entries.
  void validate() const;
};

struct LossReport {
  double sds = 0.0;
  double preservation_l1 = 0.0;
  double preservation_dssim = 0.0;
  GroupScalars anchor;
  double total = 0.0;
};

/// mask * edited + (1 - mask) * original, per pixel and channel.
ImageBuffer compose_pseudo_gt(const MaskBuffer& mask, const ImageBuffer& edited, const ImageBuffer& original);

struct SsimResult {
  double ssim = 0.0;     // mean over pixels and channels
  ImageBuffer gradient;  // d(mean ssim)/d(a), when requested
  ImageBuffer map;       // per-pixel, per-channel SSIM, when requested
};

/// Per-channel SSIM with an 11x11 Gaussian window (sigma 1.5), zero padding at
/// the border, C1 = 0.01^2, C2 = 0.03^2.
SsimResult ssim(const ImageBuffer& a, const ImageBuffer& b, bool with_gradient = false, bool with_map = false);

/// (1 - ssim) / 2.
double dssim(const ImageBuffer& a, const ImageBuffer& b);

struct PreservationResult {
  double l1 = 0.0;
  double dssim = 0.0;
  double value = 0.0;    // lambda_l1 * l1 + lambda_ssim * dssim
  ImageBuffer gradient;  // d(value)/d(edited); pseudo_gt is held constant
};

PreservationResult preservation_loss(const ImageBuffer& edited, const ImageBuffer& pseudo_gt,
                                     const LossWeights& weights);

/// Weighted sum of all terms. Throws NumericError if any component is NaN/Inf.
LossReport total_loss(double sds_value, const PreservationResult& preservation,
                      const GroupScalars& anchor_values, const LossWeights& weights);

}  // namespace gsedit

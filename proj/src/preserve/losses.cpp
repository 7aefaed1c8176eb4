#include <cmath>

#include "gsedit/errors.hpp"
#include "gsedit/preserve.hpp"

namespace gsedit {

bool GroupScalars::all_finite() const {
  return std::isfinite(position) && std::isfinite(log_scale) && std::isfinite(rotation) &&
         std::isfinite(opacity) && std::isfinite(color);
}

void LossWeights::validate() const {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError(std::string("loss weight ") + name + " must be finite and >= 0");
  };
  check(lambda_sds, "lambda_sds");
  check(lambda_l1, "lambda_l1");
  check(lambda_ssim, "lambda_ssim");
  check(lambda_anchor.position, "lambda_anchor.position");
  check(lambda_anchor.log_scale, "lambda_anchor.log_scale");
  check(lambda_anchor.rotation, "lambda_anchor.rotation");
  check(lambda_anchor.opacity, "lambda_anchor.opacity");
  check(lambda_anchor.color, "lambda_anchor.color");
}

ImageBuffer compose_pseudo_gt(const MaskBuffer& mask, const ImageBuffer& edited, const ImageBuffer& original) {
  if (!edited.same_shape(original) || mask.width() != edited.width || mask.height() != edited.height)
    throw ContractViolation("compose_pseudo_gt: shape mismatch");
  ImageBuffer out(edited.width, edited.height, edited.channels);
  for (std::size_t p = 0; p < edited.pixel_count(); ++p) {
    const float m = mask.grid.data[p];
    for (int c = 0; c < edited.channels; ++c) {
      const std::size_t i = p * edited.channels + c;
      // Exact selection for binary masks, linear blend otherwise.
      if (m == 0.0f)
        out.data[i] = original.data[i];
      else if (m == 1.0f)
        out.data[i] = edited.data[i];
      else
        out.data[i] = m * edited.data[i] + (1.0f - m) * original.data[i];
    }
  }
  return out;
}

PreservationResult preservation_loss(const ImageBuffer& edited, const ImageBuffer& pseudo_gt,
                                     const LossWeights& weights) {
  if (!edited.same_shape(pseudo_gt)) throw ContractViolation("preservation_loss: shape mismatch");
  PreservationResult r;
  r.gradient = ImageBuffer(edited.width, edited.height, edited.channels);
  if (edited.data.empty()) return r;
  const double norm = 1.0 / static_cast<double>(edited.data.size());

  double l1 = 0.0;
  for (std::size_t i = 0; i < edited.data.size(); ++i) {
    const double d = static_cast<double>(edited.data[i]) - pseudo_gt.data[i];
    l1 += std::abs(d);
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    r.gradient.data[i] = static_cast<float>(weights.lambda_l1 * sign * norm);
  }
  r.l1 = l1 * norm;

  if (weights.lambda_ssim != 0.0) {
    const SsimResult s = ssim(edited, pseudo_gt, true);
    r.dssim = 0.5 * (1.0 - s.ssim);
    for (std::size_t i = 0; i < edited.data.size(); ++i)
      r.gradient.data[i] += static_cast<float>(-0.5 * weights.lambda_ssim * s.gradient.data[i]);
  } else {
    r.dssim = dssim(edited, pseudo_gt);
  }
  r.value = weights.lambda_l1 * r.l1 + weights.lambda_ssim * r.dssim;
  return r;
}

LossReport total_loss(double sds_value, const PreservationResult& preservation,
                      const GroupScalars& anchor_values, const LossWeights& weights) {
  if (!std::isfinite(sds_value) || !std::isfinite(preservation.l1) || !std::isfinite(preservation.dssim) ||
      !anchor_values.all_finite())
    throw NumericError("total_loss: non-finite loss component");
  LossReport r;
  r.sds = sds_value;
  r.preservation_l1 = preservation.l1;
  r.preservation_dssim = preservation.dssim;
  r.anchor = anchor_values;
  r.total = weights.lambda_sds * sds_value + weights.lambda_l1 * preservation.l1 +
            weights.lambda_ssim * preservation.dssim + weights.lambda_anchor.dot(anchor_values);
  if (!std::isfinite(r.total)) throw NumericError("total_loss: non-finite total");
  return r;
}

}  // namespace gsedit

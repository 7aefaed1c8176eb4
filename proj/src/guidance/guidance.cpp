#include "gsedit/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gsedit/errors.hpp"

namespace gsedit {

double NoiseSchedule::weight_at(int t) const {
  if (t < t_min || t > t_max)
    throw ContractViolation("timestep " + std::to_string(t) + " outside [" + std::to_string(t_min) + ", " +
                            std::to_string(t_max) + "]");
  const double w = weight ? weight(t) : 1.0;
  if (!std::isfinite(w) || w < 0.0) throw NumericError("SDS weight w(t) must be finite and >= 0");
  return w;
}

ImageBuffer sds_gradient(const GuidanceResponse& response, const NoiseSchedule& schedule, int t) {
  const double w = schedule.weight_at(t);
  ImageBuffer g = response.residual;
  for (auto& v : g.data) v = static_cast<float>(w * v);
  return g;
}

double sds_loss_value(const GuidanceResponse& response, const NoiseSchedule& schedule, int t) {
  const double w = schedule.weight_at(t);
  if (response.residual.data.empty()) return 0.0;
  double sum = 0.0;
  for (const float v : response.residual.data) sum += static_cast<double>(v) * v;
  return w * sum / static_cast<double>(response.residual.data.size());
}

GuidanceResponse oracle_guidance(const GuidanceRequest& request, const ImageBuffer& target, double strength) {
  if (!request.image.same_shape(target)) throw ContractViolation("oracle target shape differs from request image");
  if (request.image.channels != 3) throw ContractViolation("guidance requests carry RGB images");
  GuidanceResponse out;
  out.residual = ImageBuffer(target.width, target.height, 3);
  AttentionMap att;
  att.grid = ImageBuffer(target.width, target.height, 1);
  float peak = 0.0f;
  for (std::size_t p = 0; p < target.pixel_count(); ++p) {
    float lum = 0.0f;
    constexpr float kLuma[3] = {0.299f, 0.587f, 0.114f};
    for (int c = 0; c < 3; ++c) {
      const float diff = request.image.data[p * 3 + c] - target.data[p * 3 + c];
      out.residual.data[p * 3 + c] = static_cast<float>(strength * diff);
      lum += kLuma[c] * std::abs(diff);
    }
    att.grid.data[p] = lum;
    peak = std::max(peak, lum);
  }
  if (peak > 0.0f)
    for (auto& v : att.grid.data) v /= peak;
  out.attention = std::move(att);
  return out;
}

OracleGuidance::OracleGuidance(std::vector<ImageBuffer> targets, double strength)
    : targets_(std::move(targets)), strength_(strength) {}

const ImageBuffer& OracleGuidance::target(int view_id) const {
  if (view_id < 0 || static_cast<std::size_t>(view_id) >= targets_.size())
    throw ContractViolation("no oracle target for view " + std::to_string(view_id));
  return targets_[view_id];
}

GuidanceResponse OracleGuidance::guide(const GuidanceRequest& request, int view_id) {
  GuidanceResponse r = oracle_guidance(request, target(view_id), strength_);
  if (r.attention) r.attention->view_id = view_id;
  return r;
}

GuidanceResponse RemoteGuidance::guide(const GuidanceRequest& request, int view_id) {
  GuidanceResponse r = remote_guidance(request, endpoint_, timeout_ms_);
  if (r.attention) r.attention->view_id = view_id;
  return r;
}

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    throw ConfigError("endpoint must look like host:port, got '" + text + "'");
  Endpoint e;
  e.host = text.substr(0, colon);
  try {
    const int port = std::stoi(text.substr(colon + 1));
    if (port <= 0 || port > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw ConfigError("bad port in endpoint '" + text + "'");
  }
  return e;
}

}  // namespace gsedit

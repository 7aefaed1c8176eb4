#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gsedit/image.hpp"

namespace gsedit {

/// Timestep range and the SDS weight w(t).
struct NoiseSchedule {
  int t_min = 20;
  int t_max = 980;
  std::function<double(int)> weight = [](int) { return 1.0; };

  double weight_at(int t) const;
};

struct GuidanceRequest {
  ImageBuffer image;  // rendered RGB view
  std::string prompt;
  std::uint32_t timestep = 0;
  std::uint64_t noise_seed = 0;
};

struct GuidanceResponse {
  ImageBuffer residual;                  // eps_pred - eps, image shaped
  std::optional<AttentionMap> attention;  // keyword attention, when provided
};

/// dL/dI = w(t) * residual.
ImageBuffer sds_gradient(const GuidanceResponse& response, const NoiseSchedule& schedule, int t);

/// w(t) * mean(residual^2). Logged only; the optimizer consumes sds_gradient.
double sds_loss_value(const GuidanceResponse& response, const NoiseSchedule& schedule, int t);

/// Synthetic guidance: residual = strength * (image - target), so SDS descent
/// becomes gradient descent on 0.5 * strength * ||I - target||^2. Attention is
/// the luminance of |image - target| scaled to peak 1.
GuidanceResponse oracle_guidance(const GuidanceRequest& request, const ImageBuffer& target, double strength);

/// Source of SDS residuals for a rendered view.
class GuidanceProvider {
 public:
  virtual ~GuidanceProvider() = default;
  virtual GuidanceResponse guide(const GuidanceRequest& request, int view_id) = 0;
};

/// In-process oracle holding one target image per view.
class OracleGuidance final : public GuidanceProvider {
 public:
  OracleGuidance(std::vector<ImageBuffer> targets, double strength);
  GuidanceResponse guide(const GuidanceRequest& request, int view_id) override;
  const ImageBuffer& target(int view_id) const;

 private:
  std::vector<ImageBuffer> targets_;
  double strength_;
};

/// "host:port" of a GSGP server.
struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& text);
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Byte counters of one request/response exchange.
struct TransferStats {
  std::size_t bytes_sent = 0;
  std::size_t bytes_received = 0;
  int attempts = 0;
};

/// Sends one guidance request over GSGP, retrying once on transport errors.
GuidanceResponse remote_guidance(const GuidanceRequest& request, const Endpoint& endpoint,
                                 int timeout_ms = 30000, TransferStats* stats = nullptr);

/// GuidanceProvider backed by remote_guidance.
class RemoteGuidance final : public GuidanceProvider {
 public:
  explicit RemoteGuidance(Endpoint endpoint, int timeout_ms = 30000)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}
  GuidanceResponse guide(const GuidanceRequest& request, int view_id) override;

 private:
  Endpoint endpoint_;
  int timeout_ms_;
};

}  // namespace gsedit

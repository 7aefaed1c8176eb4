#include "gsedit/errors.hpp"
#include "gsedit/guidance.hpp"
#include "gsedit/protocol.hpp"
#include "gsedit/socket.hpp"

namespace gsedit {

namespace {

// Protocol-level refusals are not retried; only I/O failures are.
class ProtocolRefusal : public TransportError {
 public:
  using TransportError::TransportError;
};

std::vector<std::uint8_t> exchange(const std::vector<std::uint8_t>& frame, wire::MessageType expected,
                                   const Endpoint& endpoint, int timeout_ms, TransferStats& stats) {
  wire::Socket sock = wire::Socket::connect(endpoint.host, endpoint.port, timeout_ms);
  sock.send_all(frame);
  stats.bytes_sent = frame.size();
  wire::Frame reply = wire::read_frame(sock);
  stats.bytes_received = wire::kHeaderSize + reply.payload.size();
  if (reply.header.type == wire::MessageType::Error)
    throw ProtocolRefusal("server error: " + wire::decode_error(reply.payload));
  if (reply.header.version != wire::kVersion)
    throw ProtocolRefusal("protocol version mismatch: server speaks " + std::to_string(reply.header.version));
  if (reply.header.type != expected)
    throw ProtocolRefusal("unexpected reply type " + std::to_string(static_cast<int>(reply.header.type)));
  return std::move(reply.payload);
}

template <class Decode>
auto request_with_retry(const std::vector<std::uint8_t>& frame, wire::MessageType expected,
                        const Endpoint& endpoint, int timeout_ms, TransferStats* stats, Decode decode) {
  TransferStats local;
  TransferStats& st = stats ? *stats : local;
  st = {};
  for (int attempt = 1;; ++attempt) {
    st.attempts = attempt;
    try {
      const auto payload = exchange(frame, expected, endpoint, timeout_ms, st);
      try {
        return decode(payload);
      } catch (const TransportError& e) {
        throw ProtocolRefusal(std::string("malformed response: ") + e.what());
      }
    } catch (const ProtocolRefusal&) {
      throw;
    } catch (const TransportError& e) {
      if (attempt >= 2) throw TransportError("request to " + endpoint.str() + " failed after retry: " + e.what());
    }
  }
}

}  // namespace

GuidanceResponse remote_guidance(const GuidanceRequest& request, const Endpoint& endpoint, int timeout_ms,
                                 TransferStats* stats) {
  const auto frame = wire::encode_frame(wire::MessageType::GuidanceRequest, wire::encode_guidance_request(request));
  return request_with_retry(frame, wire::MessageType::GuidanceResponse, endpoint, timeout_ms, stats,
                            [&](const std::vector<std::uint8_t>& payload) {
                              return wire::decode_guidance_response(payload, request.image.width,
                                                                    request.image.height);
                            });
}

ImageBuffer remote_segmentation(const wire::SegmentationRequest& request, const Endpoint& endpoint,
                                int timeout_ms, TransferStats* stats) {
  const auto frame =
      wire::encode_frame(wire::MessageType::SegmentationRequest, wire::encode_segmentation_request(request));
  return request_with_retry(frame, wire::MessageType::SegmentationResponse, endpoint, timeout_ms, stats,
                            [&](const std::vector<std::uint8_t>& payload) {
                              return wire::decode_segmentation_response(payload, request.image.width,
                                                                        request.image.height);
                            });
}

}  // namespace gsedit

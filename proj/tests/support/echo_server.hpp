#pragma once

#include <atomic>
#include <thread>

#include "gsedit/errors.hpp"
#include "gsedit/protocol.hpp"
#include "gsedit/socket.hpp"

namespace gsedit::test {

/// Loopback GSGP server for transport tests. Echo mode answers guidance
/// requests with residual = request image; segmentation requests get the
/// image's red channel back as the soft mask.
class EchoServer {
 public:
  enum class Mode { Echo, CloseEarly, ErrorReply, WrongVersion };

  explicit EchoServer(Mode mode, int max_connections = 16) : mode_(mode) {
    thread_ = std::thread([this, max_connections] { run(max_connections); });
  }
  ~EchoServer() {
    stop_ = true;
    thread_.join();
  }

  std::uint16_t port() const { return listener_.port(); }
  int connections() const { return connections_; }

 private:
  void run(int max_connections) {
    while (!stop_ && connections_ < max_connections) {
      wire::Socket s;
      try {
        s = listener_.accept(50);
      } catch (const TransportError&) {
        continue;
      }
      ++connections_;
      try {
        serve(s);
      } catch (const TransportError&) {
      }
    }
  }

  void serve(wire::Socket& s) {
    const wire::Frame f = wire::read_frame(s);
    if (mode_ == Mode::CloseEarly) return;
    if (mode_ == Mode::ErrorReply || f.header.version != wire::kVersion) {
      wire::write_frame(s, wire::MessageType::Error, wire::encode_error("unsupported request"));
      return;
    }
    if (f.header.type == wire::MessageType::GuidanceRequest) {
      const GuidanceRequest req = wire::decode_guidance_request(f.payload);
      GuidanceResponse resp;
      resp.residual = req.image;
      auto payload = wire::encode_guidance_response(resp);
      auto head = wire::encode_header({mode_ == Mode::WrongVersion ? std::uint16_t{2} : wire::kVersion,
                                       wire::MessageType::GuidanceResponse, payload.size()});
      s.send_all(head);
      s.send_all(payload);
    } else if (f.header.type == wire::MessageType::SegmentationRequest) {
      const auto req = wire::decode_segmentation_request(f.payload);
      ImageBuffer mask(req.image.width, req.image.height, 1);
      for (std::size_t p = 0; p < mask.data.size(); ++p) mask.data[p] = req.image.data[p * 3];
      wire::write_frame(s, wire::MessageType::SegmentationResponse, wire::encode_segmentation_response(mask));
    } else {
      wire::write_frame(s, wire::MessageType::Error, wire::encode_error("unsupported message type"));
    }
  }

  Mode mode_;
  wire::Listener listener_;
  std::atomic<bool> stop_{false};
  std::atomic<int> connections_{0};
  std::thread thread_;
};

}  // namespace gsedit::test

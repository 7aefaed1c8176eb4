#pragma once

// GSGP wire protocol. Every frame is
//   "GSGP" | u16 version | u8 type | u64 payload length | payload
// with all integers little-endian.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsedit/guidance.hpp"
#include "gsedit/image.hpp"

namespace gsedit {
namespace wire {

inline constexpr char kMagic[4] = {'G', 'S', 'G', 'P'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 4 + 2 + 1 + 8;
/// Refuse payloads above 1 GiB rather than allocating them.
inline constexpr std::uint64_t kMaxPayload = 1ull << 30;

enum class MessageType : std::uint8_t {
  GuidanceRequest = 1,
  GuidanceResponse = 2,
  SegmentationRequest = 3,
  SegmentationResponse = 4,
  Error = 255,
};

struct FrameHeader {
  std::uint16_t version = kVersion;
  MessageType type = MessageType::Error;
  std::uint64_t length = 0;
};

/// Pixel coordinate used in point prompts.
struct PixelCoord {
  int x = 0;
  int y = 0;
  bool operator==(const PixelCoord&) const = default;
};

/// Segmentation request. An empty point list asks for a keyword-only mask.
struct SegmentationRequest {
  std::uint32_t view_id = 0;
  std::string keyword;
  std::vector<PixelCoord> positives;
  std::vector<PixelCoord> negatives;
  ImageBuffer image;  // RGB view the prompts refer to

  bool operator==(const SegmentationRequest& o) const {
    return view_id == o.view_id && keyword == o.keyword && positives == o.positives &&
           negatives == o.negatives && image.same_shape(o.image) && image.data == o.image.data;
  }
};

std::vector<std::uint8_t> encode_header(const FrameHeader& header);
/// Throws TransportError on bad magic; version is returned for the caller to check.
FrameHeader decode_header(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_frame(MessageType type, std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_guidance_request(const GuidanceRequest& request);
GuidanceRequest decode_guidance_request(std::span<const std::uint8_t> payload);

/// Response payloads carry no dimensions; the decoder takes them from the request.
std::vector<std::uint8_t> encode_guidance_response(const GuidanceResponse& response);
GuidanceResponse decode_guidance_response(std::span<const std::uint8_t> payload, int width, int height);

std::vector<std::uint8_t> encode_segmentation_request(const SegmentationRequest& request);
SegmentationRequest decode_segmentation_request(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_segmentation_response(const ImageBuffer& soft_mask);
ImageBuffer decode_segmentation_response(std::span<const std::uint8_t> payload, int width, int height);

std::vector<std::uint8_t> encode_error(const std::string& message);
std::string decode_error(std::span<const std::uint8_t> payload);

}  // namespace wire

/// Sends one segmentation request over GSGP with the same retry policy.
/// Returns the provider's soft mask (single channel, request image size).
ImageBuffer remote_segmentation(const wire::SegmentationRequest& request, const Endpoint& endpoint,
                                int timeout_ms = 30000, TransferStats* stats = nullptr);

}  // namespace gsedit

#include "gsedit/protocol.hpp"

#include <bit>
#include <cstring>

#include "gsedit/errors.hpp"

namespace gsedit::wire {

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto at = buf_.size();
    buf_.resize(at + sizeof(T));
    std::memcpy(buf_.data() + at, &v, sizeof(T));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void floats(const std::vector<float>& v) { bytes(v.data(), v.size() * sizeof(float)); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void floats(std::vector<float>& out, std::size_t n) {
    if (n > (b_.size() - pos_) / sizeof(float)) throw TransportError("payload shorter than declared float grid");
    out.resize(n);
    std::memcpy(out.data(), b_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  void finish() const {
    if (pos_ != b_.size()) throw TransportError("payload has " + std::to_string(b_.size() - pos_) + " trailing bytes");
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > b_.size() - pos_) throw TransportError("payload truncated");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::size_t grid_size(std::uint32_t w, std::uint32_t h, std::size_t channels) {
  const std::uint64_t n = static_cast<std::uint64_t>(w) * h * channels;
  if (n * sizeof(float) > kMaxPayload) throw TransportError("image dimensions exceed payload limit");
  return static_cast<std::size_t>(n);
}

void put_points(Writer& w, const std::vector<PixelCoord>& pts) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(pts.size()));
  for (const auto& p : pts) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.x));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.y));
  }
}

std::vector<PixelCoord> get_points(Reader& r, std::uint32_t w, std::uint32_t h) {
  const auto n = r.get<std::uint32_t>();
  if (n > r.remaining() / 8) throw TransportError("point count exceeds payload");
  std::vector<PixelCoord> pts(n);
  for (auto& p : pts) {
    const auto x = r.get<std::uint32_t>();
    const auto y = r.get<std::uint32_t>();
    if (x >= w || y >= h) throw TransportError("point prompt outside the image");
    p = {static_cast<int>(x), static_cast<int>(y)};
  }
  return pts;
}

}  // namespace

static_assert(std::endian::native == std::endian::little, "wire codec assumes a little-endian host");

std::vector<std::uint8_t> encode_header(const FrameHeader& header) {
  Writer w;
  w.bytes(kMagic, 4);
  w.put<std::uint16_t>(header.version);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(header.type));
  w.put<std::uint64_t>(header.length);
  return w.take();
}

FrameHeader decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw TransportError("short frame header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw TransportError("bad frame magic");
  Reader r(bytes.subspan(4, kHeaderSize - 4));
  FrameHeader h;
  h.version = r.get<std::uint16_t>();
  h.type = static_cast<MessageType>(r.get<std::uint8_t>());
  h.length = r.get<std::uint64_t>();
  return h;
}

std::vector<std::uint8_t> encode_frame(MessageType type, std::span<const std::uint8_t> payload) {
  auto out = encode_header({kVersion, type, payload.size()});
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::vector<std::uint8_t> encode_guidance_request(const GuidanceRequest& req) {
  if (req.image.channels != 3) throw ContractViolation("guidance requests carry RGB images");
  Writer w;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(req.image.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(req.image.height));
  w.put<std::uint32_t>(req.timestep);
  w.put<std::uint64_t>(req.noise_seed);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(req.prompt.size()));
  w.bytes(req.prompt.data(), req.prompt.size());
  w.floats(req.image.data);
  return w.take();
}

GuidanceRequest decode_guidance_request(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  GuidanceRequest req;
  const auto w = r.get<std::uint32_t>();
  const auto h = r.get<std::uint32_t>();
  req.timestep = r.get<std::uint32_t>();
  req.noise_seed = r.get<std::uint64_t>();
  const auto len = r.get<std::uint32_t>();
  req.prompt = r.string(len);
  req.image.width = static_cast<int>(w);
  req.image.height = static_cast<int>(h);
  req.image.channels = 3;
  r.floats(req.image.data, grid_size(w, h, 3));
  r.finish();
  return req;
}

std::vector<std::uint8_t> encode_guidance_response(const GuidanceResponse& resp) {
  Writer w;
  w.floats(resp.residual.data);
  w.put<std::uint8_t>(resp.attention ? 1 : 0);
  if (resp.attention) w.floats(resp.attention->grid.data);
  return w.take();
}

GuidanceResponse decode_guidance_response(std::span<const std::uint8_t> payload, int width, int height) {
  Reader r(payload);
  GuidanceResponse resp;
  resp.residual = ImageBuffer(width, height, 3);
  r.floats(resp.residual.data, grid_size(width, height, 3));
  const auto has_attention = r.get<std::uint8_t>();
  if (has_attention > 1) throw TransportError("has_attention flag must be 0 or 1");
  if (has_attention) {
    AttentionMap att;
    att.grid = ImageBuffer(width, height, 1);
    r.floats(att.grid.data, grid_size(width, height, 1));
    resp.attention = std::move(att);
  }
  r.finish();
  return resp;
}

std::vector<std::uint8_t> encode_segmentation_request(const SegmentationRequest& req) {
  Writer w;
  w.put<std::uint32_t>(req.view_id);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(req.image.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(req.image.height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(req.keyword.size()));
  w.bytes(req.keyword.data(), req.keyword.size());
  put_points(w, req.positives);
  put_points(w, req.negatives);
  w.floats(req.image.data);
  return w.take();
}

SegmentationRequest decode_segmentation_request(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  SegmentationRequest req;
  req.view_id = r.get<std::uint32_t>();
  const auto w = r.get<std::uint32_t>();
  const auto h = r.get<std::uint32_t>();
  req.keyword = r.string(r.get<std::uint32_t>());
  req.positives = get_points(r, w, h);
  req.negatives = get_points(r, w, h);
  req.image.width = static_cast<int>(w);
  req.image.height = static_cast<int>(h);
  req.image.channels = 3;
  r.floats(req.image.data, grid_size(w, h, 3));
  r.finish();
  return req;
}

std::vector<std::uint8_t> encode_segmentation_response(const ImageBuffer& soft_mask) {
  if (soft_mask.channels != 1) throw ContractViolation("segmentation masks are single channel");
  Writer w;
  w.floats(soft_mask.data);
  return w.take();
}

ImageBuffer decode_segmentation_response(std::span<const std::uint8_t> payload, int width, int height) {
  Reader r(payload);
  ImageBuffer mask(width, height, 1);
  r.floats(mask.data, grid_size(width, height, 1));
  r.finish();
  return mask;
}

std::vector<std::uint8_t> encode_error(const std::string& message) {
  return {message.begin(), message.end()};
}

std::string decode_error(std::span<const std::uint8_t> payload) {
  return {payload.begin(), payload.end()};
}

}  // namespace gsedit::wire

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gsedit {

/// Row-major float grid with 1 or 3 interleaved channels.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  bool same_shape(const ImageBuffer& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool all_finite() const;
};

/// Per-view scalar mask. Soft masks hold values in [0,1]; binary masks hold {0,1}.
struct MaskBuffer {
  int view_id = 0;
  ImageBuffer grid;  // single channel

  MaskBuffer() = default;
  MaskBuffer(int view, int w, int h, float fill = 0.0f) : view_id(view), grid(w, h, 1, fill) {}

  int width() const { return grid.width; }
  int height() const { return grid.height; }
  float at(int x, int y) const { return grid.at(x, y); }
  float& at(int x, int y) { return grid.at(x, y); }
  std::size_t nonzero_count() const;
  bool is_binary() const;
};

/// Cross-attention response of one prompt token in one view, values in [0,1].
struct AttentionMap {
  int view_id = 0;
  std::string keyword;
  ImageBuffer grid;  // single channel
};

/// Nonzero -> 1 for a soft mask; `cut` is the inclusive lower bound for "on".
MaskBuffer binarize(const MaskBuffer& soft, float cut);

/// Rescales an attention grid into [0,1] (divide by max when max > 1, clamp
/// negatives, zero non-finite entries).
AttentionMap normalize_attention(AttentionMap map);

}  // namespace gsedit

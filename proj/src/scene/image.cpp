#include "gsedit/image.hpp"

#include <algorithm>
#include <cmath>

namespace gsedit {

bool ImageBuffer::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
}

std::size_t MaskBuffer::nonzero_count() const {
  return static_cast<std::size_t>(
      std::count_if(grid.data.begin(), grid.data.end(), [](float v) { return v != 0.0f; }));
}

bool MaskBuffer::is_binary() const {
  return std::all_of(grid.data.begin(), grid.data.end(), [](float v) { return v == 0.0f || v == 1.0f; });
}

MaskBuffer binarize(const MaskBuffer& soft, float cut) {
  MaskBuffer out = soft;
  for (auto& v : out.grid.data) v = (v >= cut && v > 0.0f) ? 1.0f : 0.0f;
  return out;
}

AttentionMap normalize_attention(AttentionMap map) {
  float peak = 0.0f;
  for (auto& v : map.grid.data) {
    if (!std::isfinite(v) || v < 0.0f) v = 0.0f;
    peak = std::max(peak, v);
  }
  if (peak > 1.0f)
    for (auto& v : map.grid.data) v /= peak;
  return map;
}

}  // namespace gsedit

#include <algorithm>
#include <cctype>
#include <numeric>

#include "gsedit/errors.hpp"
#include "gsedit/localizer.hpp"

namespace gsedit {

const char* to_string(LocalizationMode mode) {
  return mode == LocalizationMode::Addition ? "addition" : "edit_existing";
}

LocalizationMode parse_mode(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "addition") return LocalizationMode::Addition;
  if (t == "edit_existing" || t == "editexisting") return LocalizationMode::EditExisting;
  throw ConfigError("unknown localization mode '" + text + "'");
}

MaskBuffer filter_attention(const AttentionMap& map, float threshold) {
  if (!(threshold >= 0.0f && threshold <= 1.0f)) throw ContractViolation("filter_attention: threshold outside [0,1]");
  MaskBuffer out(map.view_id, map.grid.width, map.grid.height);
  for (std::size_t i = 0; i < out.grid.data.size(); ++i) {
    const float v = map.grid.data[i];
    out.grid.data[i] = v >= threshold ? v : 0.0f;
  }
  return out;
}

double scaled_dbscan_eps(double eps, int width) { return eps * std::max(1.0, width / 256.0); }

PointPrompts select_point_prompts(const AttentionMap& map, const MaskBuffer& clustered) {
  if (clustered.width() != map.grid.width || clustered.height() != map.grid.height)
    throw ContractViolation("select_point_prompts: mask and attention sizes differ");
  std::vector<std::size_t> inside, outside;
  for (std::size_t i = 0; i < clustered.grid.data.size(); ++i)
    (clustered.grid.data[i] != 0.0f ? inside : outside).push_back(i);
  if (inside.empty())
    throw DataError("localization failed for view " + std::to_string(map.view_id) + ": clustered mask is empty");

  const auto& a = map.grid.data;
  // stable_sort keeps row-major order among equal values.
  std::stable_sort(inside.begin(), inside.end(), [&](std::size_t l, std::size_t r) { return a[l] > a[r]; });
  std::stable_sort(outside.begin(), outside.end(), [&](std::size_t l, std::size_t r) { return a[l] < a[r]; });

  const int w = map.grid.width;
  auto coord = [w](std::size_t i) { return wire::PixelCoord{static_cast<int>(i % w), static_cast<int>(i / w)}; };
  PointPrompts p;
  for (std::size_t k = 0; k < std::min(kMaxPositivePrompts, inside.size()); ++k) p.positives.push_back(coord(inside[k]));
  for (std::size_t k = 0; k < std::min(kMaxNegativePrompts, outside.size()); ++k) p.negatives.push_back(coord(outside[k]));
  return p;
}

double mask_iou(const MaskBuffer& a, const MaskBuffer& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw ContractViolation("mask_iou: size mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.grid.data.size(); ++i) {
    const bool x = a.grid.data[i] != 0.0f, y = b.grid.data[i] != 0.0f;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace gsedit

#include <filesystem>

#include "gsedit/errors.hpp"
#include "gsedit/image_io.hpp"
#include "gsedit/localizer.hpp"

namespace gsedit {

MaskBuffer OracleSegmenter::segment(const SegmentationQuery& query) {
  const int view = static_cast<int>(query.view_id);
  MaskBuffer out(view, query.image.width, query.image.height);
  ImageBuffer grid;
  if (!dir_.empty()) {
    const std::string path = view_keyword_path(dir_, view, query.keyword);
    if (!std::filesystem::exists(path)) return out;
    grid = read_pfm(path);
  } else {
    if (view < 0 || static_cast<std::size_t>(view) >= masks_.size()) return out;
    grid = masks_[view].grid;
  }
  if (grid.channels != 1 || grid.width != out.width() || grid.height != out.height())
    throw DataError("oracle mask for view " + std::to_string(view) + " does not match the view size");
  out.grid = std::move(grid);
  return out;
}

MaskBuffer WireSegmenter::segment(const SegmentationQuery& query) {
  MaskBuffer out(static_cast<int>(query.view_id), query.image.width, query.image.height);
  out.grid = remote_segmentation(query, endpoint_, timeout_ms_);
  return out;
}

}  // namespace gsedit

#pragma once

#include <string>

#include "gsedit/image.hpp"

namespace gsedit {

/// Little-endian PFM (scale -1.0). 1-channel grids write "Pf", 3-channel "PF".
/// Rows are stored bottom-to-top as the format prescribes.
void write_pfm(const ImageBuffer& image, const std::string& path);
ImageBuffer read_pfm(const std::string& path);

/// 8-bit PNG; values are clamped to [0,1] and rounded.
void write_png(const ImageBuffer& image, const std::string& path);

/// {dir}/{view_id}_{keyword}.pfm, the naming used for attention maps
/// and oracle masks.
std::string view_keyword_path(const std::string& dir, int view_id, const std::string& keyword);

}  // namespace gsedit

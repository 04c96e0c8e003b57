#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "opcagent/layout.hpp"

namespace opcagent::app {

// A corrected mask is stored as an ordinary layout file (targets and SRAFs,
// so read_layout accepts it) with two extra fields:
//
//   "offsets": per-segment offsets in nm, canonical segment order
//   "mask":    the materialized mask polygons, one per target
//
// The offsets are authoritative; "mask" is written for external viewers.
std::string format_mask(const MaskState& mask, int offset_bound = kDefaultOffsetBound);
void write_mask(const MaskState& mask, const std::filesystem::path& path,
                int offset_bound = kDefaultOffsetBound);

struct MaskFile {
  Layout layout;
  std::vector<int> offsets;  // empty when the file is a plain layout
};

MaskFile parse_mask(std::string_view text, const std::string& source = "<memory>");
MaskFile read_mask(const std::filesystem::path& path);

// The mask state a file describes: its offsets, or all zeros for a plain
// layout. Throws ParseError when the offset count does not match the
// segmentation.
MaskState mask_state(const MaskFile& file);

}  // namespace opcagent::app

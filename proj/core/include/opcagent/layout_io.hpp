#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "opcagent/layout.hpp"

namespace opcagent {

// Layout files are JSON documents:
//
//   {
//     "width_nm": 2000,
//     "height_nm": 2000,
//     "layer": "via",
//     "targets": [
//       [[100, 100], [170, 100], [170, 170], [100, 170]]
//     ],
//     "srafs": []
//   }
//
// Polygons may be given in either orientation; they are canonicalized on read.
// Errors carry the line (syntax) or field path (content).
Layout parse_layout(std::string_view text, const std::string& source = "<memory>");
Layout read_layout(const std::filesystem::path& path);

// Canonical formatting: one polygon per line, CCW from the leftmost-lowest
// vertex. write(read(f)) reproduces canonical files byte for byte.
std::string format_layout(const Layout& layout);
void write_layout(const Layout& layout, const std::filesystem::path& path);

}  // namespace opcagent

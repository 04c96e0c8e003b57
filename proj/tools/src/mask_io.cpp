#include "opcagent/app/mask_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "opcagent/error.hpp"
#include "opcagent/layout_io.hpp"

namespace opcagent::app {

std::string format_mask(const MaskState& mask, int offset_bound) {
  std::string text = format_layout(mask.base->layout);
  // Reopen the closing brace of the canonical layout text.
  text.resize(text.size() - 3);
  std::ostringstream os;
  os << text << ",\n  \"offsets\": [";
  for (std::size_t i = 0; i < mask.offsets.size(); ++i) {
    os << (i ? ", " : "") << mask.offsets[i];
  }
  os << "],\n  \"mask\": [";
  const auto polys = materialize(mask, offset_bound).polygons;
  for (std::size_t i = 0; i < polys.size(); ++i) {
    os << (i ? ",\n    [" : "\n    [");
    const auto& v = polys[i].vertices();
    for (std::size_t k = 0; k < v.size(); ++k) {
      os << (k ? ", " : "") << '[' << v[k].x << ", " << v[k].y << ']';
    }
    os << ']';
  }
  os << (polys.empty() ? "]" : "\n  ]") << "\n}\n";
  return os.str();
}

void write_mask(const MaskState& mask, const std::filesystem::path& path, int offset_bound) {
  const std::string text = format_mask(mask, offset_bound);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path.string() + ": cannot open file for writing");
  out << text;
  if (!out) throw ParseError(path.string() + ": write failed");
}

MaskFile parse_mask(std::string_view text, const std::string& source) {
  MaskFile f;
  f.layout = parse_layout(text, source);
  const auto doc = nlohmann::json::parse(text.begin(), text.end());
  if (doc.contains("offsets")) {
    const auto& o = doc["offsets"];
    if (!o.is_array()) throw ParseError(source + ": field 'offsets': expected a list of integers");
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (!o[i].is_number_integer()) {
        throw ParseError(source + ": field 'offsets[" + std::to_string(i) +
                         "]': expected an integer");
      }
      f.offsets.push_back(o[i].get<int>());
    }
  }
  return f;
}

MaskFile read_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_mask(buf.str(), path.string());
}

MaskState mask_state(const MaskFile& file) {
  auto base = std::make_shared<const SegmentedLayout>(file.layout);
  MaskState m = MaskState::uniform(base, 0);
  if (!file.offsets.empty()) {
    if (file.offsets.size() != base->size()) {
      throw ParseError("mask has " + std::to_string(file.offsets.size()) + " offsets for " +
                       std::to_string(base->size()) + " segments");
    }
    m.offsets = file.offsets;
  }
  return m;
}

}  // namespace opcagent::app

#include "opcagent/layout_io.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "opcagent/error.hpp"

namespace opcagent {

namespace {

using nlohmann::json;

std::size_t line_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

[[noreturn]] void fail(const std::string& source, const std::string& field, const std::string& msg) {
  throw ParseError(source + ": field '" + field + "': " + msg);
}

std::int32_t read_int(const json& j, const std::string& source, const std::string& field) {
  if (!j.is_number_integer()) fail(source, field, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<std::int32_t>::min() || v > std::numeric_limits<std::int32_t>::max()) {
    fail(source, field, "value out of 32-bit range");
  }
  return static_cast<std::int32_t>(v);
}

std::vector<Polygon> read_polygons(const json& doc, const char* key, bool required,
                                   const std::string& source) {
  std::vector<Polygon> out;
  if (!doc.contains(key)) {
    if (required) fail(source, key, "missing");
    return out;
  }
  const json& list = doc.at(key);
  if (!list.is_array()) fail(source, key, "expected a list of polygons");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string pfield = std::string(key) + "[" + std::to_string(i) + "]";
    const json& poly = list[i];
    if (!poly.is_array()) fail(source, pfield, "expected a list of [x, y] vertices");
    std::vector<Point> ring;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const std::string vfield = pfield + "[" + std::to_string(k) + "]";
      const json& v = poly[k];
      if (!v.is_array() || v.size() != 2) fail(source, vfield, "expected [x, y]");
      ring.push_back({read_int(v[0], source, vfield), read_int(v[1], source, vfield)});
    }
    try {
      out.push_back(canonical_polygon(std::move(ring)));
    } catch (const GeometryError& err) {
      fail(source, pfield, err.what());
    }
  }
  return out;
}

void append_polygons(std::ostringstream& os, const std::vector<Polygon>& polys) {
  if (polys.empty()) {
    os << "[]";
    return;
  }
  os << "[\n";
  for (std::size_t i = 0; i < polys.size(); ++i) {
    os << "    [";
    const auto& v = polys[i].vertices();
    for (std::size_t k = 0; k < v.size(); ++k) {
      os << (k ? ", " : "") << '[' << v[k].x << ", " << v[k].y << ']';
    }
    os << ']' << (i + 1 < polys.size() ? ",\n" : "\n");
  }
  os << "  ]";
}

}  // namespace

Layout parse_layout(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& err) {
    throw ParseError(source + ": line " + std::to_string(line_of(text, err.byte)) + ": " +
                     err.what());
  }
  if (!doc.is_object()) throw ParseError(source + ": line 1: expected a JSON object");

  Layout layout;
  if (!doc.contains("width_nm")) fail(source, "width_nm", "missing");
  if (!doc.contains("height_nm")) fail(source, "height_nm", "missing");
  if (!doc.contains("layer")) fail(source, "layer", "missing");
  layout.width = read_int(doc["width_nm"], source, "width_nm");
  layout.height = read_int(doc["height_nm"], source, "height_nm");
  if (!doc["layer"].is_string()) fail(source, "layer", "expected \"via\" or \"metal\"");
  try {
    layout.layer = layer_from_string(doc["layer"].get<std::string>());
  } catch (const ConfigError& err) {
    fail(source, "layer", err.what());
  }
  layout.targets = read_polygons(doc, "targets", true, source);
  layout.srafs = read_polygons(doc, "srafs", false, source);
  try {
    validate_layout(layout);
  } catch (const GeometryError& err) {
    throw ParseError(source + ": " + err.what());
  }
  return layout;
}

Layout read_layout(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_layout(buf.str(), path.string());
}

std::string format_layout(const Layout& layout) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"width_nm\": " << layout.width << ",\n";
  os << "  \"height_nm\": " << layout.height << ",\n";
  os << "  \"layer\": \"" << to_string(layout.layer) << "\",\n";
  os << "  \"targets\": ";
  append_polygons(os, layout.targets);
  os << ",\n  \"srafs\": ";
  append_polygons(os, layout.srafs);
  os << "\n}\n";
  return os.str();
}

void write_layout(const Layout& layout, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path.string() + ": cannot open file for writing");
  out << format_layout(layout);
  if (!out) throw ParseError(path.string() + ": write failed");
}

}  // namespace opcagent

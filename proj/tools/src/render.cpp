#include "opcagent/app/render.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "opcagent/error.hpp"

namespace opcagent::app {
namespace {

Panel from_binary(const BinaryGrid& g) {
  Panel p(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) p.at(r, c) = g.at(r, c) ? 255 : 0;
  }
  return p;
}

bool on_boundary(const BinaryGrid& g, int r, int c) {
  if (!g.at(r, c)) return false;
  if (r == 0 || c == 0 || r + 1 == g.rows() || c + 1 == g.cols()) return true;
  return !g.at(r - 1, c) || !g.at(r + 1, c) || !g.at(r, c - 1) || !g.at(r, c + 1);
}

void check_shape(const BinaryGrid& a, const BinaryGrid& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string("render: ") + what + " grid has a different size");
  }
}

}  // namespace

RenderSet render_panels(const BinaryGrid& target, const BinaryGrid& mask,
                        const LithoResult& result) {
  check_shape(target, mask, "mask");
  check_shape(target, result.printed_nominal, "printed");
  check_shape(result.printed_inner, result.printed_outer, "corner");
  check_shape(target, result.printed_outer, "corner");
  RenderSet s;
  s.target = from_binary(target);
  s.mask = from_binary(mask);
  s.contour = Panel(target.rows(), target.cols());
  s.pvband = Panel(target.rows(), target.cols());
  for (int r = 0; r < target.rows(); ++r) {
    for (int c = 0; c < target.cols(); ++c) {
      std::uint8_t v = target.at(r, c) ? 64 : 0;
      if (on_boundary(result.printed_nominal, r, c)) v = 255;
      s.contour.at(r, c) = v;
      s.pvband.at(r, c) = result.printed_inner.at(r, c) != result.printed_outer.at(r, c) ? 255 : 0;
    }
  }
  return s;
}

void write_png(const Panel& panel, const std::filesystem::path& path) {
  if (panel.rows() <= 0 || panel.cols() <= 0) throw ConfigError("render: empty image");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw ParseError(path.string() + ": cannot open file for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng: cannot create info struct");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(panel.rows()));
  std::vector<std::uint8_t> pixels(panel.data().begin(), panel.data().end());
  for (int r = 0; r < panel.rows(); ++r) {
    // Grid row 0 is the bottom of the clip.
    rows[static_cast<std::size_t>(r)] =
        pixels.data() + static_cast<std::size_t>(panel.rows() - 1 - r) * panel.cols();
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(path.string() + ": PNG encoding failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(panel.cols()),
               static_cast<png_uint_32>(panel.rows()), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Panel read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw ParseError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ParseError(path.string() + ": " + image.message);
  }
  const int rows = static_cast<int>(image.height);
  const int cols = static_cast<int>(image.width);
  Panel p(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      p.at(rows - 1 - r, c) = buf[static_cast<std::size_t>(r) * cols + c];
    }
  }
  return p;
}

}  // namespace opcagent::app

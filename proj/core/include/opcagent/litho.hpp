#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opcagent/geometry.hpp"
#include "opcagent/layout.hpp"

namespace opcagent {

// Row-major 2D array. Row 0 is the bottom of the clip (y = 0).
template <class T>
class Grid {
public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  T& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using BinaryGrid = Grid<std::uint8_t>;

struct AerialImage {
  Grid<double> intensity;
  int pixel_nm = 1;
};

enum class KernelKind { gaussian, socs };

struct DoseCorners {
  double min = 0.98;
  double nominal = 1.0;
  double max = 1.02;

  friend bool operator==(const DoseCorners&, const DoseCorners&) = default;
};

struct LithoConfig {
  int pixel_nm = 2;
  KernelKind kernel = KernelKind::gaussian;
  double sigma_nm = 25.0;
  // Gaussian taps are truncated at this many sigmas and renormalized.
  double kernel_radius_sigmas = 4.0;
  std::filesystem::path kernel_file;  // SOCS mode only
  // Fraction of the open-frame intensity at nominal dose.
  double resist_threshold = 0.5;
  DoseCorners doses;
  double epe_search_range_nm = 40.0;

  // Throws ConfigError.
  void validate(std::int32_t width, std::int32_t height) const;

  friend bool operator==(const LithoConfig&, const LithoConfig&) = default;
};

// One coherent system of a sum-of-coherent-systems model. `taps` is a
// size x size row-major complex kernel sampled at the litho pixel pitch and
// centered on its middle tap.
struct SocsKernel {
  double weight = 1.0;
  int size = 1;
  std::vector<std::complex<double>> taps;
};

// Kernel file format (whitespace separated, '#' starts a comment):
//
//   SOCS <count> <size>
//   <weight_0>
//   <re> <im>   (size*size pairs, row-major)
//   <weight_1>
//   ...
std::vector<SocsKernel> parse_socs_kernels(std::string_view text);
std::vector<SocsKernel> read_socs_kernels(const std::filesystem::path& path);

// pixel = 1 iff its center lies inside any polygon (half-open on the
// right/top boundary).
BinaryGrid rasterize(std::span<const Polygon> polygons, std::int32_t width, std::int32_t height,
                     int pixel_nm);

// Normalized Gaussian taps (2r+1)^2, row-major, r = ceil(radius_sigmas * sigma_px).
std::vector<double> gaussian_taps(double sigma_px, double radius_sigmas, int& radius);

// pixel = 1 iff intensity >= level.
BinaryGrid print(const AerialImage& image, double level);

// Area in nm^2 between the inner and outer printed contours.
double pv_band(const BinaryGrid& inner, const BinaryGrid& outer, int pixel_nm);

// A measure point on a target edge with the edge's outward normal.
struct MeasureSite {
  Vec2 position;
  Direction normal;
};

struct EpeSample {
  double epe = 0.0;  // nm, positive = printed contour outside the target edge
  bool found = true;
};

// Bilinear sample of the image at a point in nm (clamped to the pixel-center
// lattice).
double sample_intensity(const AerialImage& image, Vec2 p);

// Walks the nominal intensity along each site's normal over +-search_range
// and linearly interpolates the first threshold crossing. Throws GeometryError
// for sites outside the image.
std::vector<EpeSample> measure_epe(const AerialImage& nominal, std::span<const MeasureSite> sites,
                                   double level, double search_range_nm);

std::vector<MeasureSite> measure_sites(const SegmentedLayout& base);

struct LithoResult {
  BinaryGrid printed_inner;
  BinaryGrid printed_nominal;
  BinaryGrid printed_outer;
  AerialImage nominal;
  std::vector<EpeSample> epe;  // one per measure site
  double epe_total = 0.0;      // sum of |epe|
  double pvb = 0.0;            // nm^2
};

// Anything that can evaluate a mask. Tests substitute stubs.
class Simulator {
public:
  virtual ~Simulator() = default;
  virtual LithoResult simulate(std::span<const Polygon> mask,
                               std::span<const MeasureSite> sites) const = 0;
};

// Convolution-plus-threshold lithography model on a fixed clip size.
// Immutable after construction; simulate() may be called concurrently.
class LithoModel final : public Simulator {
public:
  LithoModel(LithoConfig config, std::int32_t width, std::int32_t height);
  ~LithoModel() override;
  LithoModel(const LithoModel&) = delete;
  LithoModel& operator=(const LithoModel&) = delete;

  const LithoConfig& config() const { return config_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  // Intensity at unit dose (mask convolved with the optical kernel).
  Grid<double> unit_intensity(const BinaryGrid& mask) const;
  AerialImage aerial(const BinaryGrid& mask, double dose) const;
  // Resist threshold in absolute intensity units.
  double print_level() const { return config_.resist_threshold * open_frame_; }
  double open_frame_level() const { return open_frame_; }
  BinaryGrid print(const AerialImage& image) const { return opcagent::print(image, print_level()); }

  LithoResult simulate(std::span<const Polygon> mask,
                       std::span<const MeasureSite> sites) const override;

private:
  AerialImage scaled(const Grid<double>& unit, double dose) const;

  struct Convolver;
  LithoConfig config_;
  std::int32_t width_;
  std::int32_t height_;
  int rows_;
  int cols_;
  double open_frame_ = 1.0;
  std::unique_ptr<Convolver> conv_;
};

// simulate() on a materialized mask state with the state's own measure sites.
LithoResult simulate(const MaskState& mask, const Simulator& sim);

}  // namespace opcagent

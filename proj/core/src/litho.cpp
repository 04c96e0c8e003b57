#include "opcagent/litho.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "opcagent/error.hpp"

namespace opcagent {

namespace {

// FFTW's planner is not re-entrant; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int good_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int f : {2, 3, 5, 7}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return m;
  }
}

template <class T>
struct FftwFree {
  void operator()(T* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double, FftwFree<double>>;
using ComplexBuffer = std::unique_ptr<fftw_complex, FftwFree<fftw_complex>>;

RealBuffer alloc_real(std::size_t n) {
  RealBuffer b(fftw_alloc_real(n));
  std::fill_n(b.get(), n, 0.0);
  return b;
}

ComplexBuffer alloc_complex(std::size_t n) {
  ComplexBuffer b(fftw_alloc_complex(n));
  for (std::size_t i = 0; i < n; ++i) b.get()[i][0] = b.get()[i][1] = 0.0;
  return b;
}

}  // namespace

void LithoConfig::validate(std::int32_t width, std::int32_t height) const {
  if (pixel_nm <= 0) throw ConfigError("litho.pixel_nm must be positive");
  if (width % pixel_nm != 0 || height % pixel_nm != 0) {
    throw ConfigError("litho.pixel_nm must divide the clip width and height");
  }
  if (!(doses.min < 1.0 && 1.0 < doses.max) || doses.min <= 0.0) {
    throw ConfigError("litho.dose corners must satisfy 0 < min < 1 < max");
  }
  if (!(resist_threshold > 0.0 && resist_threshold < 1.0)) {
    throw ConfigError("litho.resist_threshold must lie in (0, 1)");
  }
  if (kernel == KernelKind::gaussian && !(sigma_nm > 0.0)) {
    throw ConfigError("litho.sigma_nm must be positive");
  }
  if (!(kernel_radius_sigmas > 0.0)) throw ConfigError("litho.kernel_radius_sigmas must be positive");
  if (!(epe_search_range_nm > 0.0)) throw ConfigError("litho.epe_search_range_nm must be positive");
  if (kernel == KernelKind::socs && kernel_file.empty()) {
    throw ConfigError("litho.kernel_file is required for the socs kernel");
  }
}

std::vector<SocsKernel> parse_socs_kernels(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::ostringstream stripped;
  for (std::string line; std::getline(in, line);) {
    stripped << line.substr(0, line.find('#')) << '\n';
  }
  std::istringstream tok(stripped.str());
  std::string magic;
  int count = 0;
  int size = 0;
  if (!(tok >> magic >> count >> size) || magic != "SOCS") {
    throw ConfigError("kernel file: expected header 'SOCS <count> <size>'");
  }
  if (count <= 0 || size <= 0 || size % 2 == 0) {
    throw ConfigError("kernel file: count must be positive and size a positive odd number");
  }
  std::vector<SocsKernel> kernels(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    auto& ker = kernels[static_cast<std::size_t>(k)];
    ker.size = size;
    if (!(tok >> ker.weight) || !(ker.weight >= 0.0)) {
      throw ConfigError("kernel file: bad weight for kernel " + std::to_string(k));
    }
    ker.taps.resize(static_cast<std::size_t>(size) * size);
    for (auto& t : ker.taps) {
      double re = 0;
      double im = 0;
      if (!(tok >> re >> im) || !std::isfinite(re) || !std::isfinite(im)) {
        throw ConfigError("kernel file: kernel " + std::to_string(k) + " has too few or bad taps");
      }
      t = {re, im};
    }
  }
  std::string extra;
  if (tok >> extra) throw ConfigError("kernel file: unexpected trailing data '" + extra + "'");
  return kernels;
}

std::vector<SocsKernel> read_socs_kernels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open kernel file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_socs_kernels(buf.str());
}

BinaryGrid rasterize(std::span<const Polygon> polygons, std::int32_t width, std::int32_t height,
                     int pixel_nm) {
  const int rows = height / pixel_nm;
  const int cols = width / pixel_nm;
  BinaryGrid grid(rows, cols, 0);
  std::vector<std::int32_t> xs;
  for (const auto& poly : polygons) {
    const Rect bb = poly.bbox();
    const auto& v = poly.vertices();
    // Rows whose center y = (r + 0.5) p lies in [y0, y1).
    const int r0 = std::max(0, static_cast<int>(std::ceil(bb.y0 / double(pixel_nm) - 0.5)));
    const int r1 = std::min(rows, static_cast<int>(std::ceil(bb.y1 / double(pixel_nm) - 0.5)));
    for (int r = r0; r < r1; ++r) {
      const double y = (r + 0.5) * pixel_nm;
      xs.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Point& a = v[i];
        const Point& b = v[(i + 1) % v.size()];
        if (a.x != b.x) continue;
        if (y >= std::min(a.y, b.y) && y < std::max(a.y, b.y)) xs.push_back(a.x);
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k] / double(pixel_nm) - 0.5)));
        const int c1 =
            std::min(cols, static_cast<int>(std::ceil(xs[k + 1] / double(pixel_nm) - 0.5)));
        for (int c = c0; c < c1; ++c) grid.at(r, c) = 1;
      }
    }
  }
  return grid;
}

std::vector<double> gaussian_taps(double sigma_px, double radius_sigmas, int& radius) {
  radius = static_cast<int>(std::ceil(radius_sigmas * sigma_px));
  const int n = 2 * radius + 1;
  std::vector<double> taps(static_cast<std::size_t>(n) * n);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      const double w = std::exp(-(i * i + j * j) / (2.0 * sigma_px * sigma_px));
      taps[static_cast<std::size_t>(i + radius) * n + (j + radius)] = w;
      sum += w;
    }
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

BinaryGrid print(const AerialImage& image, double level) {
  BinaryGrid out(image.intensity.rows(), image.intensity.cols(), 0);
  auto src = image.intensity.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= level ? 1 : 0;
  return out;
}

double pv_band(const BinaryGrid& inner, const BinaryGrid& outer, int pixel_nm) {
  if (inner.rows() != outer.rows() || inner.cols() != outer.cols()) {
    throw GeometryError("pv_band: corner grids differ in shape");
  }
  std::int64_t count = 0;
  auto a = inner.data();
  auto b = outer.data();
  for (std::size_t i = 0; i < a.size(); ++i) count += (a[i] != 0) != (b[i] != 0);
  return static_cast<double>(count) * pixel_nm * pixel_nm;
}

double sample_intensity(const AerialImage& image, Vec2 p) {
  const auto& g = image.intensity;
  const double u = std::clamp(p.x / image.pixel_nm - 0.5, 0.0, double(g.cols() - 1));
  const double v = std::clamp(p.y / image.pixel_nm - 0.5, 0.0, double(g.rows() - 1));
  const int c0 = std::min(static_cast<int>(std::floor(u)), g.cols() - 1);
  const int r0 = std::min(static_cast<int>(std::floor(v)), g.rows() - 1);
  const int c1 = std::min(c0 + 1, g.cols() - 1);
  const int r1 = std::min(r0 + 1, g.rows() - 1);
  const double fu = u - c0;
  const double fv = v - r0;
  const double bottom = g.at(r0, c0) * (1 - fu) + g.at(r0, c1) * fu;
  const double top = g.at(r1, c0) * (1 - fu) + g.at(r1, c1) * fu;
  return bottom * (1 - fv) + top * fv;
}

std::vector<EpeSample> measure_epe(const AerialImage& nominal, std::span<const MeasureSite> sites,
                                   double level, double search_range_nm) {
  // Half-nanometer steps land on every pixel-center knot of the bilinear field
  // for integer pixel pitches, so linear interpolation between samples is exact.
  constexpr double kStep = 0.5;
  const int steps = static_cast<int>(std::ceil(search_range_nm / kStep));
  const double width = double(nominal.intensity.cols()) * nominal.pixel_nm;
  const double height = double(nominal.intensity.rows()) * nominal.pixel_nm;

  std::vector<EpeSample> out;
  out.reserve(sites.size());
  for (const auto& site : sites) {
    const Vec2 p = site.position;
    if (p.x < 0 || p.y < 0 || p.x > width || p.y > height) {
      std::ostringstream os;
      os << "measure point (" << p.x << "," << p.y << ") lies outside the clip";
      throw GeometryError(os.str());
    }
    const auto at = [&](double s) {
      const double d = std::min(s, search_range_nm);
      return sample_intensity(nominal, {p.x + d * site.normal.dx, p.y + d * site.normal.dy});
    };
    const double i0 = at(0.0);
    const bool inside = i0 >= level;
    const double dir = inside ? 1.0 : -1.0;
    EpeSample sample{dir * search_range_nm, false};
    double prev_s = 0.0;
    double prev_i = i0;
    for (int k = 1; k <= steps; ++k) {
      const double s = std::min(k * kStep, search_range_nm);
      const double cur = at(dir * s);
      const bool crossed = inside ? cur < level : cur >= level;
      if (crossed) {
        const double t = (prev_i - level) / (prev_i - cur);
        sample = {dir * (prev_s + t * (s - prev_s)), true};
        break;
      }
      prev_s = s;
      prev_i = cur;
    }
    out.push_back(sample);
  }
  return out;
}

std::vector<MeasureSite> measure_sites(const SegmentedLayout& base) {
  std::vector<MeasureSite> sites;
  sites.reserve(base.measured_segments.size());
  for (int idx : base.measured_segments) {
    const Segment& s = base.segments[static_cast<std::size_t>(idx)];
    sites.push_back({*s.measure_point, s.outward_normal});
  }
  return sites;
}

struct LithoModel::Convolver {
  int rows = 0;
  int cols = 0;
  int nr = 0;
  int nc = 0;
  bool socs = false;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  std::vector<ComplexBuffer> spectra;
  std::vector<double> weights;

  std::size_t real_size() const { return static_cast<std::size_t>(nr) * nc; }
  std::size_t half_size() const { return static_cast<std::size_t>(nr) * (nc / 2 + 1); }

  ~Convolver() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
  }

  // Builds the spectrum of a kernel given as (2R+1)^2 taps centered at R.
  template <class TapFn>
  ComplexBuffer spectrum(int radius, TapFn tap) {
    const int n = 2 * radius + 1;
    if (!socs) {
      auto spatial = alloc_real(real_size());
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const int r = ((i - radius) % nr + nr) % nr;
          const int c = ((j - radius) % nc + nc) % nc;
          spatial.get()[static_cast<std::size_t>(r) * nc + c] += tap(i, j).real();
        }
      }
      auto spec = alloc_complex(half_size());
      fftw_execute_dft_r2c(forward, spatial.get(), spec.get());
      return spec;
    }
    auto spatial = alloc_complex(real_size());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int r = ((i - radius) % nr + nr) % nr;
        const int c = ((j - radius) % nc + nc) % nc;
        const auto t = tap(i, j);
        auto& cell = spatial.get()[static_cast<std::size_t>(r) * nc + c];
        cell[0] += t.real();
        cell[1] += t.imag();
      }
    }
    auto spec = alloc_complex(real_size());
    fftw_execute_dft(forward, spatial.get(), spec.get());
    return spec;
  }

  void plan(int radius) {
    nr = good_fft_size(rows + radius);
    nc = good_fft_size(cols + radius);
    std::lock_guard lock(planner_mutex());
    if (!socs) {
      auto in = alloc_real(real_size());
      auto out = alloc_complex(half_size());
      forward = fftw_plan_dft_r2c_2d(nr, nc, in.get(), out.get(), FFTW_ESTIMATE);
      inverse = fftw_plan_dft_c2r_2d(nr, nc, out.get(), in.get(), FFTW_ESTIMATE);
    } else {
      auto a = alloc_complex(real_size());
      auto b = alloc_complex(real_size());
      forward = fftw_plan_dft_2d(nr, nc, a.get(), b.get(), FFTW_FORWARD, FFTW_ESTIMATE);
      inverse = fftw_plan_dft_2d(nr, nc, b.get(), a.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    if (!forward || !inverse) throw ConfigError("FFTW failed to create a plan");
  }

  Grid<double> apply(const BinaryGrid& mask) const {
    Grid<double> out(rows, cols, 0.0);
    const double norm = 1.0 / static_cast<double>(real_size());
    if (!socs) {
      auto in = alloc_real(real_size());
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          in.get()[static_cast<std::size_t>(r) * nc + c] = mask.at(r, c);
        }
      }
      auto spec = alloc_complex(half_size());
      fftw_execute_dft_r2c(forward, in.get(), spec.get());
      const fftw_complex* k = spectra.front().get();
      for (std::size_t i = 0; i < half_size(); ++i) {
        const double re = spec.get()[i][0] * k[i][0] - spec.get()[i][1] * k[i][1];
        const double im = spec.get()[i][0] * k[i][1] + spec.get()[i][1] * k[i][0];
        spec.get()[i][0] = re;
        spec.get()[i][1] = im;
      }
      fftw_execute_dft_c2r(inverse, spec.get(), in.get());
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          out.at(r, c) = std::max(0.0, in.get()[static_cast<std::size_t>(r) * nc + c] * norm);
        }
      }
      return out;
    }
    auto in = alloc_complex(real_size());
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) in.get()[static_cast<std::size_t>(r) * nc + c][0] = mask.at(r, c);
    }
    auto spec = alloc_complex(real_size());
    fftw_execute_dft(forward, in.get(), spec.get());
    auto prod = alloc_complex(real_size());
    auto field = alloc_complex(real_size());
    for (std::size_t k = 0; k < spectra.size(); ++k) {
      const fftw_complex* h = spectra[k].get();
      for (std::size_t i = 0; i < real_size(); ++i) {
        prod.get()[i][0] = spec.get()[i][0] * h[i][0] - spec.get()[i][1] * h[i][1];
        prod.get()[i][1] = spec.get()[i][0] * h[i][1] + spec.get()[i][1] * h[i][0];
      }
      fftw_execute_dft(inverse, prod.get(), field.get());
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const auto& f = field.get()[static_cast<std::size_t>(r) * nc + c];
          const double re = f[0] * norm;
          const double im = f[1] * norm;
          out.at(r, c) += weights[k] * (re * re + im * im);
        }
      }
    }
    return out;
  }
};

LithoModel::LithoModel(LithoConfig config, std::int32_t width, std::int32_t height)
    : config_(std::move(config)), width_(width), height_(height) {
  config_.validate(width, height);
  rows_ = height / config_.pixel_nm;
  cols_ = width / config_.pixel_nm;
  conv_ = std::make_unique<Convolver>();
  conv_->rows = rows_;
  conv_->cols = cols_;

  if (config_.kernel == KernelKind::gaussian) {
    int radius = 0;
    const auto taps =
        gaussian_taps(config_.sigma_nm / config_.pixel_nm, config_.kernel_radius_sigmas, radius);
    conv_->plan(radius);
    const int n = 2 * radius + 1;
    conv_->spectra.push_back(conv_->spectrum(radius, [&](int i, int j) {
      return std::complex<double>(taps[static_cast<std::size_t>(i) * n + j], 0.0);
    }));
    conv_->weights = {1.0};
    open_frame_ = 1.0;
  } else {
    const auto kernels = read_socs_kernels(config_.kernel_file);
    conv_->socs = true;
    const int radius = kernels.front().size / 2;
    conv_->plan(radius);
    open_frame_ = 0.0;
    for (const auto& k : kernels) {
      std::complex<double> sum = 0.0;
      for (const auto& t : k.taps) sum += t;
      open_frame_ += k.weight * std::norm(sum);
      conv_->spectra.push_back(conv_->spectrum(radius, [&](int i, int j) {
        return k.taps[static_cast<std::size_t>(i) * k.size + j];
      }));
      conv_->weights.push_back(k.weight);
    }
    if (!(open_frame_ > 0.0)) throw ConfigError("kernel file: open-frame intensity is zero");
  }
}

LithoModel::~LithoModel() = default;

Grid<double> LithoModel::unit_intensity(const BinaryGrid& mask) const {
  if (mask.rows() != rows_ || mask.cols() != cols_) {
    throw GeometryError("aerial: mask grid does not match the model's clip size");
  }
  return conv_->apply(mask);
}

AerialImage LithoModel::scaled(const Grid<double>& unit, double dose) const {
  // Intensity is linear in dose for the incoherent gaussian kernel and
  // quadratic in the field amplitude for SOCS.
  const double factor = config_.kernel == KernelKind::gaussian ? dose : dose * dose;
  AerialImage img{unit, config_.pixel_nm};
  for (auto& v : img.intensity.data()) v *= factor;
  return img;
}

AerialImage LithoModel::aerial(const BinaryGrid& mask, double dose) const {
  return scaled(unit_intensity(mask), dose);
}

LithoResult LithoModel::simulate(std::span<const Polygon> mask,
                                 std::span<const MeasureSite> sites) const {
  const BinaryGrid raster = rasterize(mask, width_, height_, config_.pixel_nm);
  const Grid<double> unit = unit_intensity(raster);
  LithoResult res;
  res.nominal = scaled(unit, config_.doses.nominal);
  res.printed_nominal = print(res.nominal);
  res.printed_inner = print(scaled(unit, config_.doses.min));
  res.printed_outer = print(scaled(unit, config_.doses.max));
  res.epe = measure_epe(res.nominal, sites, print_level(), config_.epe_search_range_nm);
  for (const auto& e : res.epe) res.epe_total += std::abs(e.epe);
  res.pvb = pv_band(res.printed_inner, res.printed_outer, config_.pixel_nm);
  return res;
}

LithoResult simulate(const MaskState& mask, const Simulator& sim) {
  const auto polys = materialize(mask).all();
  const auto sites = measure_sites(*mask.base);
  return sim.simulate(polys, sites);
}

}  // namespace opcagent

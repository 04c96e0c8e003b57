#include <doctest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <random>

#include "opcagent/error.hpp"
#include "opcagent/layout.hpp"
#include "opcagent/litho.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace opcagent;
using namespace testing;
using testing::segmented;
using testing::via_layout;

namespace {

std::int64_t ones(const BinaryGrid& g) {
  std::int64_t n = 0;
  for (auto v : g.data()) n += v != 0;
  return n;
}

AerialImage image_from(int rows, int cols, int pixel_nm, auto fn) {
  AerialImage img{Grid<double>(rows, cols, 0.0), pixel_nm};
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      img.intensity.at(r, c) = fn((c + 0.5) * pixel_nm, (r + 0.5) * pixel_nm);
  return img;
}

}  // namespace

TEST_SUITE("litho") {
  TEST_CASE("rasterize") {
    const std::vector<Polygon> one{Polygon::rectangle(0, 0, 10, 10)};
    const BinaryGrid g = rasterize(one, 20, 20, 2);
    CHECK(g.rows() == 10);
    CHECK(ones(g) == 25);
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) CHECK(g.at(r, c) == 1);
    CHECK(ones(rasterize(std::vector<Polygon>{}, 20, 20, 2)) == 0);
    const std::vector<Polygon> two{Polygon::rectangle(0, 0, 10, 10),
                                   Polygon::rectangle(20, 4, 40, 16)};
    CHECK(ones(rasterize(two, 60, 60, 2)) == (100 + 240) / 4);
    const std::vector<Polygon> ell{
        canonical_polygon({{0, 0}, {20, 0}, {20, 6}, {6, 6}, {6, 20}, {0, 20}})};
    CHECK(ones(rasterize(ell, 40, 40, 2)) == (20 * 6 + 6 * 14) / 4);
  }

  TEST_CASE("transform convolution matches direct convolution on 64x64 grids") {
    LithoConfig cfg;
    const LithoModel model(cfg, 128, 128);
    const double sigma = cfg.sigma_nm / cfg.pixel_nm;
    const GaussianTaps tap(sigma, static_cast<int>(std::ceil(cfg.kernel_radius_sigmas * sigma)));
    const int radius = tap.radius;
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
      const BinaryGrid m = random_mask(rng, 64, 64, 1 + trial % 4);
      const auto fast = model.aerial(m, 1.02).intensity;
      auto slow = spatial_convolve<double>(m, radius, tap);
      for (auto& v : slow.data()) v *= 1.02;
      CHECK(max_diff(fast, slow) <= 1e-6 * max_abs(slow));
    }
  }

  TEST_CASE("SOCS mode matches the direct sum of squared coherent fields") {
    testing::TempDir dir("socs");
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    const int size = 5;
    std::vector<std::vector<std::complex<double>>> taps(2);
    const double weights[] = {0.7, 0.3};
    {
      std::ofstream f(dir / "k.txt");
      f << "# two random kernels\nSOCS 2 " << size << "\n";
      for (int k = 0; k < 2; ++k) {
        f << weights[k] << "\n";
        for (int t = 0; t < size * size; ++t) {
          taps[static_cast<std::size_t>(k)].emplace_back(n01(rng), n01(rng));
          f.precision(17);
          f << taps[static_cast<std::size_t>(k)].back().real() << " "
            << taps[static_cast<std::size_t>(k)].back().imag() << "\n";
        }
      }
    }
    LithoConfig cfg;
    cfg.kernel = KernelKind::socs;
    cfg.kernel_file = dir / "k.txt";
    const LithoModel model(cfg, 128, 128);
    const BinaryGrid m = random_mask(rng, 64, 64, 3);
    const double dose = 0.98;
    Grid<double> slow(64, 64, 0.0);
    for (int k = 0; k < 2; ++k) {
      const auto& h = taps[static_cast<std::size_t>(k)];
      const auto field = spatial_convolve<std::complex<double>>(m, 2, [&](int i, int j) {
        return h[static_cast<std::size_t>(i + 2) * size + (j + 2)];
      });
      for (std::size_t p = 0; p < slow.data().size(); ++p) {
        slow.data()[p] += dose * dose * weights[k] * std::norm(field.data()[p]);
      }
    }
    const auto fast = model.aerial(m, dose).intensity;
    CHECK(max_diff(fast, slow) <= 1e-6 * max_abs(slow));
  }

  TEST_CASE("malformed kernel files are config errors") {
    CHECK_THROWS_AS(parse_socs_kernels("SOCS 1 4\n1.0\n"), ConfigError);
    CHECK_THROWS_AS(parse_socs_kernels("SOCX 1 1\n1.0 1 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_socs_kernels("SOCS 1 1\n1.0\n"), ConfigError);
    CHECK_THROWS_AS(parse_socs_kernels("SOCS 1 1\n1.0 1 0 7\n"), ConfigError);
    CHECK(parse_socs_kernels("SOCS 1 1 # header\n0.5\n1 0\n").size() == 1);
    LithoConfig cfg;
    cfg.kernel = KernelKind::socs;
    cfg.kernel_file = "/nonexistent/kernel.txt";
    CHECK_THROWS_AS(LithoModel(cfg, 128, 128), ConfigError);
  }

  TEST_CASE("aerial of an empty mask is zero; open frame reaches the dose") {
    const LithoModel model(LithoConfig{}, 400, 400);
    CHECK(max_abs(model.aerial(BinaryGrid(200, 200, 0), 1.0).intensity) == 0.0);
    const auto open = model.aerial(BinaryGrid(200, 200, 1), 1.02).intensity;
    CHECK(open.at(100, 100) == doctest::Approx(1.02).epsilon(1e-3));
    for (double v : open.data()) CHECK(v >= 0.0);
  }

  TEST_CASE("print") {
    AerialImage flat{Grid<double>(4, 4, 0.5), 2};
    CHECK(ones(print(flat, 0.5)) == 16);
    CHECK(ones(print(AerialImage{Grid<double>(4, 4, 0.0), 2}, 0.5)) == 0);
    // Ramp 0.01 per column: columns 26.. reach 0.255.
    const AerialImage ramp = image_from(3, 50, 2, [](double x, double) { return (x - 1.0) / 200.0; });
    const BinaryGrid p = print(ramp, 0.255);
    for (int c = 0; c < 50; ++c) CHECK(p.at(1, c) == (c >= 26 ? 1 : 0));
  }

  TEST_CASE("measure_epe on constructed fields") {
    // Intensity falls along +x and crosses 0.5 at x = 53.
    const AerialImage img = image_from(50, 50, 2, [](double x, double) { return 0.5 - (x - 53.0) * 0.01; });
    const std::vector<MeasureSite> out{{{50.0, 50.0}, {1, 0}}};
    auto e = measure_epe(img, out, 0.5, 40.0);
    REQUIRE(e.size() == 1);
    CHECK(e[0].found);
    CHECK(e[0].epe == doctest::Approx(3.0).epsilon(1e-12));
    const std::vector<MeasureSite> in{{{56.0, 50.0}, {1, 0}}};
    CHECK(measure_epe(img, in, 0.5, 40.0)[0].epe == doctest::Approx(-3.0).epsilon(1e-12));
    const AerialImage dark{Grid<double>(50, 50, 0.0), 2};
    const auto d = measure_epe(dark, out, 0.5, 40.0);
    CHECK_FALSE(d[0].found);
    CHECK(d[0].epe == -40.0);
    const AerialImage bright{Grid<double>(50, 50, 1.0), 2};
    CHECK(measure_epe(bright, out, 0.5, 40.0)[0].epe == 40.0);
    const std::vector<MeasureSite> outside{{{150.0, 50.0}, {1, 0}}};
    CHECK_THROWS_AS(measure_epe(img, outside, 0.5, 40.0), GeometryError);
  }

  TEST_CASE("pv_band pixel accounting") {
    BinaryGrid inner(10, 10, 0);
    CHECK(pv_band(inner, inner, 2) == 0.0);
    BinaryGrid outer = inner;
    for (int r = 3; r < 7; ++r)
      for (int c = 3; c < 7; ++c) inner.at(r, c) = 1;
    for (int r = 2; r < 8; ++r)
      for (int c = 2; c < 8; ++c) outer.at(r, c) = 1;
    const int ring = 36 - 16;
    CHECK(pv_band(inner, outer, 2) == 4.0 * ring);
    CHECK_THROWS_AS(pv_band(inner, BinaryGrid(5, 5, 0), 2), GeometryError);
  }

  TEST_CASE("isolated via matches the continuous erf solution") {
    const LithoModel model(LithoConfig{}, 1000, 1000);
    const auto base = segmented(via_layout({{466, 466}}, 1000));
    const LithoResult r = simulate(MaskState::uniform(base, 0), model);
    REQUIRE(r.epe.size() == 4);
    for (const auto& e : r.epe) {
      CHECK(e.found);
      CHECK(e.epe == doctest::Approx(r.epe[0].epe).epsilon(1e-12));
    }
    // Continuous model: I(x, y) = g(x) g(y), g(x) = Phi((x + 35) / s) - Phi((x - 35) / s).
    // The edge sits where g(x) g(0) = 0.5; bisection on the closed form.
    const auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    const auto g = [&](double x) { return phi((x + 35.0) / 25.0) - phi((x - 35.0) / 25.0); };
    double lo = 0.0, hi = 80.0;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) * g(0.0) > 0.5 ? lo : hi) = mid;
    }
    const double expected = lo - 35.0;
    CHECK(expected == doctest::Approx(-6.4518).epsilon(1e-4));
    CHECK(std::abs(r.epe[0].epe - expected) < 0.1);
    CHECK(r.epe_total == doctest::Approx(4 * std::abs(r.epe[0].epe)));
    CHECK(r.pvb > 0.0);
  }

  TEST_CASE("growing every offset by 2 strictly grows the nominal print") {
    const LithoModel model(LithoConfig{}, 2000, 2000);
    const auto base = segmented(via_layout({{300, 300}, {520, 330}, {900, 1200}}));
    for (int o = -4; o <= 6; o += 2) {
      const auto a = simulate(MaskState::uniform(base, o), model);
      const auto b = simulate(MaskState::uniform(base, o + 2), model);
      CHECK(ones(b.printed_nominal) > ones(a.printed_nominal));
    }
  }

  TEST_CASE("empty layout: no measure points, zero EPE and PV band") {
    const LithoModel model(LithoConfig{}, 400, 400);
    const auto base = segmented(Layout{400, 400, LayerKind::via, {}, {}});
    const auto r = simulate(MaskState::uniform(base, 3), model);
    CHECK(r.epe.empty());
    CHECK(r.epe_total == 0.0);
    CHECK(r.pvb == 0.0);
  }

  TEST_CASE("monotonicity, corner nesting and XOR band on random via masks") {
    const LithoModel model(LithoConfig{}, 1000, 1000);
    const auto& cfg = model.config();
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> pos(150, 780);
    std::uniform_int_distribution<int> off(-6, 8);
    for (int trial = 0; trial < 100; ++trial) {
      Layout l{1000, 1000, LayerKind::via, {}, {}};
      while (l.targets.size() < 3) {
        const Point p{pos(rng) / 2 * 2, pos(rng) / 2 * 2};
        bool ok = true;
        for (const auto& t : l.targets) {
          const Rect b = t.bbox();
          if (std::abs(b.x0 - p.x) < 200 && std::abs(b.y0 - p.y) < 200) ok = false;
        }
        if (ok) l.targets.push_back(testing::via_at(p.x, p.y));
      }
      const auto base = segmented(l);
      MaskState m = MaskState::uniform(base, 0);
      for (auto& o : m.offsets) o = off(rng);
      const auto polys = materialize(m).all();
      const BinaryGrid g = rasterize(polys, 1000, 1000, cfg.pixel_nm);
      BinaryGrid bigger = g;
      for (int r = 100; r < 140; ++r)
        for (int c = 100; c < 140; ++c) bigger.at(r, c) = 1;
      const auto i0 = model.unit_intensity(g);
      const auto i1 = model.unit_intensity(bigger);
      bool monotone = true;
      for (std::size_t k = 0; k < i0.data().size(); ++k) {
        monotone = monotone && i1.data()[k] >= i0.data()[k] - 1e-12;
      }
      CHECK(monotone);

      const LithoResult res = model.simulate(polys, measure_sites(*base));
      std::int64_t xor_count = 0;
      bool nested = true;
      for (std::size_t k = 0; k < res.printed_inner.data().size(); ++k) {
        const bool in = res.printed_inner.data()[k];
        const bool out = res.printed_outer.data()[k];
        const bool nom = res.printed_nominal.data()[k];
        nested = nested && (!in || nom) && (!nom || out);
        xor_count += in != out;
      }
      CHECK(nested);
      CHECK(res.pvb == static_cast<double>(xor_count) * cfg.pixel_nm * cfg.pixel_nm);
      CHECK(res.pvb >= 0.0);
    }
  }

  TEST_CASE("shrinking an isolated via never raises a signed EPE") {
    const LithoModel model(LithoConfig{}, 1000, 1000);
    const auto base = segmented(via_layout({{466, 466}}, 1000));
    for (int o = 6; o > -10; o -= 2) {
      const auto a = simulate(MaskState::uniform(base, o), model);
      const auto b = simulate(MaskState::uniform(base, o - 2), model);
      for (std::size_t k = 0; k < a.epe.size(); ++k) CHECK(b.epe[k].epe <= a.epe[k].epe);
    }
  }

  TEST_CASE("simulate is a pure function") {
    const LithoModel model(LithoConfig{}, 2000, 2000);
    const auto base = segmented(via_layout({{300, 300}, {600, 400}}));
    const auto a = simulate(MaskState::uniform(base, 3), model);
    const auto b = simulate(MaskState::uniform(base, 3), model);
    CHECK(a.nominal.intensity == b.nominal.intensity);
    CHECK(a.epe_total == b.epe_total);
    CHECK(a.pvb == b.pvb);
  }

  TEST_CASE("config validation") {
    LithoConfig c;
    CHECK_NOTHROW(c.validate(2000, 2000));
    CHECK_THROWS_AS(c.validate(2001, 2000), ConfigError);
    c.doses = {1.01, 1.0, 1.02};
    CHECK_THROWS_AS(c.validate(2000, 2000), ConfigError);
    c = LithoConfig{};
    c.resist_threshold = 1.0;
    CHECK_THROWS_AS(c.validate(2000, 2000), ConfigError);
  }
}

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "opcagent/modulator.hpp"

using namespace opcagent;

namespace {

Preference softmax(const std::array<double, 5>& f) {
  const double m = *std::max_element(f.begin(), f.end());
  Preference p{};
  double z = 0;
  for (int i = 0; i < 5; ++i) z += (p[i] = std::exp(f[i] - m));
  for (auto& v : p) v /= z;
  return p;
}

int argmax(const Preference& p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

TEST_SUITE("modulator") {
  TEST_CASE("zero EPE is exactly uniform") {
    const Preference p = modulate(0.0);
    for (double v : p) CHECK(v == 0.2);
  }

  TEST_CASE("epe = +10 matches direct evaluation") {
    const Preference want = softmax({201.0, 64.28125, 13.5, 1.78125, 1.0});
    const Preference p = modulate(10.0);
    for (int i = 0; i < 5; ++i) CHECK(p[i] == doctest::Approx(want[i]).epsilon(1e-12));
    CHECK(argmax(p) == 0);
    CHECK(kMovements[argmax(p)] == -2);
  }

  TEST_CASE("epe = -4 matches direct evaluation") {
    const Preference want = softmax({1.0, 1.02, 1.32, 2.62, 6.12});
    const Preference p = modulate(-4.0);
    for (int i = 0; i < 5; ++i) CHECK(p[i] == doctest::Approx(want[i]).epsilon(1e-12));
    CHECK(kMovements[argmax(p)] == 2);
  }

  TEST_CASE("sign law, monotone profile, symmetry and normalization") {
    for (int e = 1; e <= 20; ++e) {
      const Preference pos = modulate(e);
      const Preference neg = modulate(-e);
      const Preference lpos = log_modulate(e);
      const Preference lneg = log_modulate(-e);
      CHECK(argmax(pos) == 0);
      CHECK(argmax(neg) == 4);
      for (int i = 0; i + 1 < 5; ++i) {
        CHECK(lpos[i] > lpos[i + 1]);
        CHECK(lneg[i] < lneg[i + 1]);
        CHECK(pos[i] >= pos[i + 1]);
        CHECK(neg[i] <= neg[i + 1]);
        // Strict wherever both values are representable.
        if (pos[i + 1] > 0.0) CHECK(pos[i] > pos[i + 1]);
        if (neg[i] > 0.0) CHECK(neg[i] < neg[i + 1]);
      }
      double s = 0;
      for (int i = 0; i < 5; ++i) {
        CHECK(std::isfinite(lpos[i]));
        CHECK(lpos[i] <= 0.0);
        CHECK(pos[i] >= 0.0);
        if (lpos[i] > -700.0) CHECK(pos[i] > 0.0);
        if (lpos[i] < -746.0) CHECK(pos[i] == 0.0);
        CHECK(pos[i] == doctest::Approx(std::exp(lpos[i])).epsilon(1e-12));
        CHECK(neg[i] == pos[4 - i]);
        s += pos[i];
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }

  TEST_CASE("gap grows from flat to sharp") {
    double prev = -1.0;
    for (int e = 0; e <= 20; ++e) {
      const Preference p = modulate(e);
      const double gap = *std::max_element(p.begin(), p.end()) - *std::min_element(p.begin(), p.end());
      CHECK(gap >= prev);
      prev = gap;
    }
    CHECK(prev > 0.999);
  }

  TEST_CASE("custom parameters") {
    const ModulatorParams q{1.0, 2, 0.5};
    const Preference want = softmax({4.5, 2.75, 1.5, 0.75, 0.5});
    const Preference p = modulate(2.0, q);
    for (int i = 0; i < 5; ++i) CHECK(p[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }

  TEST_CASE("large EPE stays finite") {
    for (double e : {100.0, -500.0, 1e4}) {
      const Preference p = modulate(e);
      for (double v : p) CHECK(std::isfinite(v));
    }
  }

  TEST_CASE("the law suite runs in under a second") {
    const auto t0 = std::chrono::steady_clock::now();
    double acc = 0;
    for (int rep = 0; rep < 1000; ++rep)
      for (int e = -20; e <= 20; ++e) acc += modulate(e)[2];
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(acc > 0);
    CHECK(s < 1.0);
  }
}

#pragma once

#include <array>

namespace opcagent {

inline constexpr int kActionCount = 5;

// Movements in nm for action indices 0..4 (inward 2nm ... outward 2nm).
inline constexpr std::array<int, kActionCount> kMovements{-2, -1, 0, 1, 2};

// Even polynomial f(x) = k x^n + b that maps sampled EPE values to preferences.
struct ModulatorParams {
  double k = 0.02;
  int n = 4;
  double b = 1.0;

  friend bool operator==(const ModulatorParams&, const ModulatorParams&) = default;
};

using Preference = std::array<double, kActionCount>;

// Samples five points evenly over [min(0, epe), max(0, epe)] in descending
// order, maps them through f, and softmax-normalizes. A positive EPE (contour
// outside the target) favors inward movements; a negative one favors outward.
Preference modulate(double epe, const ModulatorParams& params = {});

// log of modulate(): f(x_i) - logsumexp(f). Finite and strictly ordered where
// the probabilities underflow to zero (|epe| beyond about 12 with defaults).
Preference log_modulate(double epe, const ModulatorParams& params = {});

}  // namespace opcagent

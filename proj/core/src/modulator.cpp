#include "opcagent/modulator.hpp"

#include <algorithm>
#include <cmath>

namespace opcagent {

namespace {

// f at the five descending samples of [min(0, epe), max(0, epe)].
Preference samples(double epe, const ModulatorParams& params) {
  const double step = std::abs(epe) / (kActionCount - 1);
  Preference f{};
  for (int i = 0; i < kActionCount; ++i) {
    const double x = epe > 0 ? (kActionCount - 1 - i) * step : -i * step;
    f[static_cast<std::size_t>(i)] = params.k * std::pow(x, params.n) + params.b;
  }
  return f;
}

// Summed in ascending order so that index-reversed inputs give the same bits.
double sum_sorted(Preference v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

Preference log_modulate(double epe, const ModulatorParams& params) {
  Preference f = samples(epe, params);
  const double top = *std::max_element(f.begin(), f.end());
  Preference e{};
  for (std::size_t i = 0; i < f.size(); ++i) e[i] = std::exp(f[i] - top);
  const double lse = top + std::log(sum_sorted(e));
  for (auto& v : f) v -= lse;
  return f;
}

Preference modulate(double epe, const ModulatorParams& params) {
  Preference p = samples(epe, params);
  const double top = *std::max_element(p.begin(), p.end());
  for (auto& v : p) v = std::exp(v - top);
  const double sum = sum_sorted(p);
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace opcagent

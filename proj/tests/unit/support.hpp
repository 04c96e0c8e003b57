#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "opcagent/layout.hpp"
#include "opcagent/litho.hpp"

namespace testing {

namespace fs = std::filesystem;
using namespace opcagent;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("opcagent_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline Polygon via_at(std::int32_t x, std::int32_t y) {
  return Polygon::rectangle(x, y, x + kViaSize, y + kViaSize);
}

inline Layout via_layout(std::vector<Point> corners, std::int32_t size = 2000) {
  Layout l{size, size, LayerKind::via, {}, {}};
  for (const auto& c : corners) l.targets.push_back(via_at(c.x, c.y));
  return l;
}

inline std::shared_ptr<const SegmentedLayout> segmented(Layout l) {
  return std::make_shared<const SegmentedLayout>(std::move(l));
}

// Simulator that ignores the mask and plays back a per-call schedule of
// per-site EPE values and PV band areas. Call 0 is the first simulate()
// after rewind(); the last entry of each schedule repeats.
class ScheduledSimulator final : public Simulator {
public:
  explicit ScheduledSimulator(std::vector<double> per_site_epe, std::vector<double> pvb = {1000.0})
      : schedule_(std::move(per_site_epe)), pvb_(std::move(pvb)) {}

  void rewind() { calls_ = 0; }
  int calls() const { return calls_; }

  LithoResult simulate(std::span<const Polygon>, std::span<const MeasureSite> sites) const override {
    const auto call = static_cast<std::size_t>(calls_);
    const std::size_t k = std::min(call, schedule_.size() - 1);
    ++calls_;
    LithoResult r;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      r.epe.push_back({schedule_[k], true});
      r.epe_total += std::abs(schedule_[k]);
    }
    r.pvb = pvb_[std::min(call, pvb_.size() - 1)];
    return r;
  }

private:
  std::vector<double> schedule_;
  std::vector<double> pvb_;
  mutable int calls_ = 0;
};

}  // namespace testing

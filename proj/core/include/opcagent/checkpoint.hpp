#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "opcagent/policy.hpp"

namespace opcagent {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Parameters plus the training position they were saved at.
struct Checkpoint {
  PolicyParams params;
  int phase = 0;       // 0 = untrained, 1 or 2 = last completed training phase
  int epoch = 0;       // epochs completed within `phase`
  std::string note;    // free-form, e.g. the RNG state for resuming

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Binary layout, little-endian:
//   "OPCAGCKP" u32 version
//   9 x i32 shape fields, i32 phase, i32 epoch, u32 note length, note bytes
//   u32 tensor count, then per tensor: u32 name length, name, i64 rows,
//   i64 cols, rows*cols f64 in column-major order.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<stream>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace opcagent

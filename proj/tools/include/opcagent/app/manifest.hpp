#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace opcagent::app {

// Written as manifest.json next to every command's outputs. `args` holds
// the full argument list after the program name, so `opcagent rerun
// manifest.json` can replay the run.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  std::string config_json;  // snapshot of the effective settings, a JSON object
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::string version;
  std::string started_utc;
  std::string finished_utc;
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& dir);
RunManifest read_manifest(const std::filesystem::path& path);

// "<major>.<minor>.<patch>" plus the git description of the source tree
// when it was available at configure time.
std::string version_string();
// ISO 8601, seconds precision, e.g. 2024-01-31T12:00:00Z.
std::string utc_now();

}  // namespace opcagent::app

#include "opcagent/app/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "opcagent/error.hpp"

#ifndef OPCAGENT_VERSION_STRING
#define OPCAGENT_VERSION_STRING "unknown"
#endif

namespace opcagent::app {

using nlohmann::json;

void write_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  json j;
  j["command"] = m.command;
  j["args"] = m.args;
  j["config"] = m.config_json.empty() ? json::object() : json::parse(m.config_json);
  j["seed"] = m.seed;
  j["inputs"] = m.inputs;
  j["version"] = m.version;
  j["started_utc"] = m.started_utc;
  j["finished_utc"] = m.finished_utc;
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path.string() + ": cannot open file for writing");
  out << j.dump(2) << "\n";
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  json j;
  try {
    j = json::parse(in);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.config_json = j.at("config").dump();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.version = j.at("version").get<std::string>();
    m.started_utc = j.at("started_utc").get<std::string>();
    m.finished_utc = j.at("finished_utc").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": not a run manifest: " + e.what());
  }
}

std::string version_string() { return OPCAGENT_VERSION_STRING; }

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace opcagent::app

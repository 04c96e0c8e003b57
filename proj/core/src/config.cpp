#include "opcagent/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "opcagent/error.hpp"

namespace opcagent {

using nlohmann::json;

RunConfig RunConfig::defaults(LayerKind layer) {
  RunConfig c;
  c.layer = layer;
  c.rl = RlConfig::defaults(layer);
  return c;
}

namespace {

class Section {
public:
  Section(const json& j, std::string path, const std::string& source)
      : j_(j), path_(std::move(path)), source_(source) {
    if (!j_.is_object()) fail(path_, "must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      fail(path_ + "." + key, "has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(path_ + "." + it.key(), "is not a known setting");
    }
  }

  [[noreturn]] void fail(const std::string& where, const std::string& what) const {
    throw ConfigError(source_ + ": " + where + " " + what);
  }

private:
  const json& j_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source, LayerKind layer) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  Section top(root, "config", source);
  std::string layer_name(to_string(layer));
  top.read("layer", layer_name);
  RunConfig c = RunConfig::defaults(layer_from_string(layer_name));

  if (const json* lj = top.child("litho")) {
    Section s(*lj, "litho", source);
    auto& l = c.litho;
    s.read("pixel_nm", l.pixel_nm);
    std::string kernel = l.kernel == KernelKind::socs ? "socs" : "gaussian";
    s.read("kernel", kernel);
    if (kernel == "gaussian") {
      l.kernel = KernelKind::gaussian;
    } else if (kernel == "socs") {
      l.kernel = KernelKind::socs;
    } else {
      s.fail("litho.kernel", "must be \"gaussian\" or \"socs\"");
    }
    s.read("sigma_nm", l.sigma_nm);
    s.read("kernel_radius_sigmas", l.kernel_radius_sigmas);
    std::string kernel_file = l.kernel_file.string();
    s.read("kernel_file", kernel_file);
    l.kernel_file = kernel_file;
    s.read("resist_threshold", l.resist_threshold);
    std::array<double, 3> doses{l.doses.min, l.doses.nominal, l.doses.max};
    s.read("doses", doses);
    l.doses = {doses[0], doses[1], doses[2]};
    s.read("epe_search_range_nm", l.epe_search_range_nm);
    s.finish();
  }

  if (const json* rj = top.child("rl")) {
    Section s(*rj, "rl", source);
    auto& r = c.rl;
    s.read("max_steps", r.max_steps);
    s.read("early_exit_nm", r.early_exit_nm);
    s.read("early_exit", r.early_exit);
    s.read("init_offset", r.init_offset);
    s.read("offset_bound", r.offset_bound);
    s.read("epsilon", r.epsilon);
    s.read("beta", r.beta);
    s.read("alpha", r.alpha);
    s.read("gamma", r.gamma);
    s.read("phase1_epochs", r.phase1_epochs);
    s.read("phase1_steps", r.phase1_steps);
    std::string credit = r.phase1_credit == Phase1Credit::reward ? "reward" : "return";
    s.read("phase1_credit", credit);
    if (credit == "reward") {
      r.phase1_credit = Phase1Credit::reward;
    } else if (credit == "return") {
      r.phase1_credit = Phase1Credit::episode_return;
    } else {
      s.fail("rl.phase1_credit", "must be \"return\" or \"reward\"");
    }
    s.read("phase2_epochs", r.phase2_epochs);
    s.read("use_modulator", r.use_modulator);
    s.read("seed", r.rng_seed);
    if (const json* mj = s.child("modulator")) {
      Section m(*mj, "rl.modulator", source);
      m.read("k", r.modulator.k);
      m.read("n", r.modulator.n);
      m.read("b", r.modulator.b);
      m.finish();
    }
    s.finish();
  }

  if (const json* pj = top.child("policy")) {
    Section s(*pj, "policy", source);
    s.read("seed", c.policy_seed);
    s.finish();
  }
  top.finish();
  c.rl.layer = c.layer;
  c.rl.validate();
  return c;
}

RunConfig read_config(const std::filesystem::path& path, LayerKind layer) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), layer);
}

std::string format_config(const RunConfig& c) {
  const auto& l = c.litho;
  const auto& r = c.rl;
  json j = json::object();
  j["layer"] = std::string(to_string(c.layer));
  j["litho"] = {
      {"pixel_nm", l.pixel_nm},
      {"kernel", l.kernel == KernelKind::socs ? "socs" : "gaussian"},
      {"sigma_nm", l.sigma_nm},
      {"kernel_radius_sigmas", l.kernel_radius_sigmas},
      {"kernel_file", l.kernel_file.string()},
      {"resist_threshold", l.resist_threshold},
      {"doses", {l.doses.min, l.doses.nominal, l.doses.max}},
      {"epe_search_range_nm", l.epe_search_range_nm},
  };
  j["rl"] = {
      {"max_steps", r.max_steps},
      {"early_exit_nm", r.early_exit_nm},
      {"early_exit", r.early_exit},
      {"init_offset", r.init_offset},
      {"offset_bound", r.offset_bound},
      {"epsilon", r.epsilon},
      {"beta", r.beta},
      {"alpha", r.alpha},
      {"gamma", r.gamma},
      {"phase1_epochs", r.phase1_epochs},
      {"phase1_steps", r.phase1_steps},
      {"phase1_credit", r.phase1_credit == Phase1Credit::reward ? "reward" : "return"},
      {"phase2_epochs", r.phase2_epochs},
      {"use_modulator", r.use_modulator},
      {"seed", r.rng_seed},
      {"modulator", {{"k", r.modulator.k}, {"n", r.modulator.n}, {"b", r.modulator.b}}},
  };
  j["policy"] = {{"seed", c.policy_seed}};
  return j.dump(2) + "\n";
}

}  // namespace opcagent

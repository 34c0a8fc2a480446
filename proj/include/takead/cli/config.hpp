#pragma once

// Single-file run configuration for the command-line pipeline.

#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "takead/data/collect.hpp"
#include "takead/simworld/io.hpp"
#include "takead/train/trainer.hpp"

namespace takead::cli {

using json = nlohmann::json;

// Bad config, bad flags, or a missing prerequisite: exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SuiteSelection {
  std::vector<std::uint64_t> seeds;
  std::vector<sim::ScenarioKind> kinds{sim::kAllScenarioKinds.begin(), sim::kAllScenarioKinds.end()};

  std::vector<sim::ScenarioSpec> specs() const { return sim::make_suite(seeds, kinds); }
};

struct Paths {
  std::string vocab = "artifacts/vocab.ndjson";
  std::string demos = "artifacts/demos.ndjson";
  std::string pretrained = "artifacts/pretrained.ckpt";
  std::string takeover_dir = "artifacts/takeover";
  std::string postopt_dir = "artifacts/postopt";
  std::string final_checkpoint = "artifacts/final.ckpt";
  std::string reports = "artifacts/reports";
};

struct RunConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  Paths paths;
  SuiteSelection train{data::seed_range(data::kTrainSeedBase, 4)};
  SuiteSelection validation{data::seed_range(data::kValidationSeedBase, 4)};
  SuiteSelection test{data::seed_range(data::kTestSeedBase, 5)};
  std::optional<SuiteSelection> collect;  // takeover collection; null reuses train
  std::size_t vocab_k = 64;
  int demo_stride = 2;
  policy::PolicyConfig policy;
  policy::ControlVocabulary control_vocab;
  expert::ExpertConfig expert;
  train::TrainConfig train_cfg;
  data::ShadowConfig shadow;
  policy::CreepConfig creep;
  policy::PidConfig pid;

  // Sub-seeds derived from the global seed.
  std::uint64_t vocab_seed() const { return mix_seed(seed, 11); }
  std::uint64_t init_seed() const { return mix_seed(seed, 12); }

  policy::PolicyConfig policy_config() const {
    auto p = policy;
    p.init_seed = init_seed();
    return p;
  }
  std::vector<sim::ScenarioSpec> collect_specs() const { return collect ? collect->specs() : train.specs(); }
  train::TrainConfig train_config() const {
    auto t = train_cfg;
    t.seed = seed;
    return t;
  }
};

namespace detail {

using FieldPtr = std::variant<double*, int*, std::size_t*, bool*, std::string*>;
using Fields = std::vector<std::pair<const char*, FieldPtr>>;

inline json field_json(const FieldPtr& f) {
  return std::visit([](auto* p) { return json(*p); }, f);
}

inline void read_field(const json& j, const FieldPtr& f, const std::string& where) {
  try {
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>) {
            if (!j.is_number()) throw std::invalid_argument("expected a number");
          } else if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) throw std::invalid_argument("expected true or false");
          } else if constexpr (std::is_same_v<T, std::string>) {
            if (!j.is_string()) throw std::invalid_argument("expected a string");
          } else {
            if (!j.is_number_integer()) throw std::invalid_argument("expected an integer");
            if (!std::is_same_v<T, int> && j.get<long long>() < 0) throw std::invalid_argument("expected >= 0");
          }
          *p = j.get<T>();
        },
        f);
  } catch (const std::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

inline json section_json(const Fields& fs) {
  json j = json::object();
  for (const auto& [k, f] : fs) j[k] = field_json(f);
  return j;
}

inline void read_section(const json& j, const Fields& fs, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, val] : j.items()) {
    auto it = std::find_if(fs.begin(), fs.end(), [&](const auto& f) { return key == f.first; });
    if (it == fs.end()) throw ValidationError(where + "." + key + ": unknown key");
    read_field(val, it->second, where + "." + key);
  }
}

// Every scalar section of the config, by name. Pointers refer into `c`.
inline std::vector<std::pair<const char*, Fields>> sections(RunConfig& c) {
  auto& t = c.train_cfg;
  auto& s = c.shadow;
  auto& e = c.expert;
  return {
      {"paths",
       {{"vocab", &c.paths.vocab},
        {"demos", &c.paths.demos},
        {"pretrained", &c.paths.pretrained},
        {"takeover_dir", &c.paths.takeover_dir},
        {"postopt_dir", &c.paths.postopt_dir},
        {"final_checkpoint", &c.paths.final_checkpoint},
        {"reports", &c.paths.reports}}},
      {"vocab", {{"k", &c.vocab_k}}},
      {"demo", {{"stride", &c.demo_stride}}},
      {"policy",
       {{"embed", &c.policy.embed},
        {"hidden", &c.policy.hidden},
        {"max_agents", &c.policy.scene.max_agents},
        {"map_tokens", &c.policy.scene.map_tokens},
        {"map_spacing", &c.policy.scene.map_spacing},
        {"agent_radius", &c.policy.scene.agent_radius},
        {"command_lookahead", &c.policy.scene.command_lookahead},
        {"head_init_scale", &c.policy.head_init_scale}}},
      {"expert",
       {{"v0", &e.v0},
        {"headway", &e.headway},
        {"min_gap", &e.min_gap},
        {"max_accel", &e.max_accel},
        {"comfort_decel", &e.comfort_decel},
        {"exponent", &e.exponent},
        {"lookahead_base", &e.lookahead_base},
        {"lookahead_gain", &e.lookahead_gain},
        {"forecast_horizon", &e.forecast_horizon},
        {"lateral_accel", &e.lateral_accel},
        {"scan_range", &e.scan_range},
        {"predict_horizon", &e.predict_horizon},
        {"corridor_margin", &e.corridor_margin}}},
      {"train",
       {{"beta", &t.beta},
        {"gamma", &t.gamma},
        {"label_tau", &t.label_tau},
        {"pretrain_epochs", &t.pretrain_epochs},
        {"dagger_epochs", &t.dagger_epochs},
        {"po_epochs", &t.po_epochs},
        {"pretrain_lr", &t.pretrain_lr},
        {"dagger_lr", &t.dagger_lr},
        {"po_lr", &t.po_lr},
        {"rounds", &t.rounds},
        {"batch_size", &t.batch_size},
        {"takeover_weight", &t.takeover_weight}}},
      {"shadow",
       {{"forecast_horizon", &s.forecast_horizon},
        {"steer_threshold", &s.steer_threshold},
        {"segment_frames", &s.segment_frames},
        {"suppress_frames", &s.suppress_frames},
        {"stop_line_reach", &s.stop_line_reach}}},
      {"creep",
       {{"enabled", &c.creep.enabled},
        {"still_time", &c.creep.still_time},
        {"throttle", &c.creep.throttle},
        {"duration_ticks", &c.creep.duration_ticks},
        {"clear_distance", &c.creep.clear_distance}}},
      {"pid",
       {{"kp", &c.pid.kp},
        {"ki", &c.pid.ki},
        {"integral_limit", &c.pid.integral_limit},
        {"lookahead", &c.pid.lookahead},
        {"degenerate_length", &c.pid.degenerate_length}}},
  };
}

inline json suite_json(const SuiteSelection& s) {
  json kinds = json::array();
  for (auto k : s.kinds) kinds.push_back(std::string(sim::to_string(k)));
  return {{"seeds", s.seeds}, {"kinds", kinds}};
}

// {"seeds": [...]} or {"seed_base": b, "count": n}; "kinds" optional.
inline SuiteSelection suite_from(const json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  SuiteSelection s;
  for (const auto& [key, val] : j.items())
    if (key != "seeds" && key != "seed_base" && key != "count" && key != "kinds")
      throw ValidationError(where + "." + key + ": unknown key");
  try {
    if (j.contains("seeds")) {
      s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } else if (j.contains("seed_base") && j.contains("count")) {
      s.seeds = data::seed_range(j.at("seed_base").get<std::uint64_t>(), j.at("count").get<std::size_t>());
    } else {
      throw std::invalid_argument("needs \"seeds\" or \"seed_base\" + \"count\"");
    }
    if (j.contains("kinds")) {
      s.kinds.clear();
      for (const auto& k : j.at("kinds")) s.kinds.push_back(sim::scenario_kind_from(k.get<std::string>()));
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  if (s.seeds.empty() || s.kinds.empty()) throw ValidationError(where + ": empty suite");
  return s;
}

}  // namespace detail

// Full effective config; every key present, in a fixed order.
inline json to_json(const RunConfig& c) {
  RunConfig& m = const_cast<RunConfig&>(c);
  json j = {{"seed", c.seed}, {"jobs", c.jobs}};
  for (const auto& [name, fs] : detail::sections(m)) j[name] = detail::section_json(fs);
  j["control_vocab"] = {{"throttle", c.control_vocab.throttle}, {"brake", c.control_vocab.brake},
                        {"steer", c.control_vocab.steer}};
  j["suites"] = {{"train", detail::suite_json(c.train)},
                 {"validation", detail::suite_json(c.validation)},
                 {"test", detail::suite_json(c.test)},
                 {"collect", c.collect ? detail::suite_json(*c.collect) : json(nullptr)}};
  return j;
}

inline void validate(const RunConfig& c) {
  try {
    c.train_cfg.validate();
    c.expert.validate();
    c.control_vocab.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  if (c.jobs < 1) throw ValidationError("jobs: must be >= 1");
  if (c.vocab_k < 1) throw ValidationError("vocab.k: must be >= 1");
  if (c.demo_stride < 1) throw ValidationError("demo.stride: must be >= 1");
  if (c.policy.embed < 1 || c.policy.hidden < 1 || c.policy.scene.max_agents < 1 || c.policy.scene.map_tokens < 1)
    throw ValidationError("policy: sizes must be >= 1");
  if (c.shadow.segment_frames < 1 || c.shadow.suppress_frames < 0)
    throw ValidationError("shadow: segment_frames must be >= 1 and suppress_frames >= 0");
  for (auto s : c.train.seeds)
    if (data::is_test_seed(s)) throw ValidationError("suites.train: seed " + std::to_string(s) + " is a test seed");
  if (c.collect)
    for (auto s : c.collect->seeds)
      if (data::is_test_seed(s)) throw ValidationError("suites.collect: seed " + std::to_string(s) + " is a test seed");
  for (auto s : c.validation.seeds)
    if (data::is_test_seed(s))
      throw ValidationError("suites.validation: seed " + std::to_string(s) + " is a test seed");
  const std::set<std::uint64_t> train(c.train.seeds.begin(), c.train.seeds.end());
  for (auto s : c.test.seeds)
    if (train.count(s)) throw ValidationError("suites: seed " + std::to_string(s) + " is in both train and test");
}

inline RunConfig from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  RunConfig c;
  auto secs = detail::sections(c);
  for (const auto& [key, val] : j.items()) {
    if (key == "seed") {
      detail::read_field(val, static_cast<std::size_t*>(&c.seed), "seed");
    } else if (key == "jobs") {
      detail::read_field(val, &c.jobs, "jobs");
    } else if (key == "control_vocab") {
      if (!val.is_object()) throw ValidationError("control_vocab: expected an object");
      for (const auto& [g, v] : val.items()) {
        std::vector<double>* dst = g == "throttle" ? &c.control_vocab.throttle
                                   : g == "brake"  ? &c.control_vocab.brake
                                   : g == "steer"  ? &c.control_vocab.steer
                                                   : nullptr;
        if (!dst) throw ValidationError("control_vocab." + g + ": unknown key");
        try {
          *dst = v.get<std::vector<double>>();
        } catch (const std::exception& e) {
          throw ValidationError("control_vocab." + g + ": " + e.what());
        }
      }
    } else if (key == "suites") {
      if (!val.is_object()) throw ValidationError("suites: expected an object");
      for (const auto& [name, s] : val.items()) {
        if (name == "collect") {
          c.collect.reset();
          if (!s.is_null()) c.collect = detail::suite_from(s, "suites.collect");
          continue;
        }
        SuiteSelection* dst = name == "train"        ? &c.train
                              : name == "validation" ? &c.validation
                              : name == "test"       ? &c.test
                                                     : nullptr;
        if (!dst) throw ValidationError("suites." + name + ": unknown suite");
        *dst = detail::suite_from(s, "suites." + name);
      }
    } else {
      auto it = std::find_if(secs.begin(), secs.end(), [&](const auto& s) { return key == s.first; });
      if (it == secs.end()) throw ValidationError(key + ": unknown key");
      detail::read_section(val, it->second, key);
    }
  }
  validate(c);
  return c;
}

// Applies "a.b.c=value" to a config JSON. The value is parsed as JSON when
// it parses, else taken as a string. Only existing keys may be set.
inline void apply_set(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--set " + assignment + ": expected key=value");
  const std::string path = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) throw ValidationError("--set " + path + ": unknown key");
    node = &(*node)[parts[i]];
  }
  *node = value;
}

// Worker count never changes results, so it is left out of the hash.
inline std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  j.erase("jobs");
  const std::string s = j.dump();
  return hex64(fnv1a(s.data(), s.size()));
}

// Defaults, then the file (if any), then --set overrides in order.
inline RunConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
  json j = to_json(RunConfig{});
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot read config: " + path);
    const json file = json::parse(f, nullptr, false);
    if (file.is_discarded()) throw ValidationError(path + ": not valid JSON");
    from_json(file);  // reports unknown keys against the file itself
    j.merge_patch(file);
    if (file.contains("suites"))
      for (const auto& [name, v] : file.at("suites").items()) j["suites"][name] = v;
  }
  for (const auto& s : sets) apply_set(j, s);
  return from_json(j);
}

}  // namespace takead::cli

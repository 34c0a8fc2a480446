#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "takead/diffnum/random.hpp"
#include "takead/policy/control_vocabulary.hpp"
#include "takead/policy/features.hpp"
#include "takead/policy/trajectory_vocabulary.hpp"

namespace takead::data {

using json = nlohmann::json;

inline constexpr const char* kDatasetFormat = "takead-dataset v1";

enum class TriggerKind : int { Collision = 0, Threshold };
inline std::string_view to_string(TriggerKind k) { return k == TriggerKind::Collision ? "collision" : "threshold"; }
inline TriggerKind trigger_kind_from(std::string_view s) {
  if (s == "collision") return TriggerKind::Collision;
  if (s == "threshold") return TriggerKind::Threshold;
  throw std::invalid_argument("unknown trigger kind '" + std::string(s) + "'");
}

// One expert-labelled frame. The trajectory label is stored as the raw
// expert plan; the soft target over a vocabulary is derived from it at
// training time (see train::soft_target).
struct DemoSample {
  policy::SceneFeatures features;
  policy::TrajVec expert_traj{};
  policy::ControlIndices ctrl;
  std::string scenario_id;
  double time = 0.0;

  bool operator==(const DemoSample&) const = default;
};

struct TakeoverInfo {
  TriggerKind trigger = TriggerKind::Threshold;
  int segment = 0;
  int frame = 0;  // position inside the segment, 0 on the trigger frame
  double steer_gap = 0.0;
  // Diagnostic only. Preference pairs are rebuilt from the live policy.
  int policy_traj = -1;
  policy::ControlIndices policy_ctrl;
  int round = 0;
  bool truncated = false;

  bool operator==(const TakeoverInfo&) const = default;
};

struct TakeoverSample {
  DemoSample sample;
  TakeoverInfo info;

  bool operator==(const TakeoverSample&) const = default;
};

struct FilterStats {
  std::size_t raw_segments = 0;
  std::size_t kept = 0;
  std::size_t collision = 0;
  std::size_t off_road = 0;
  std::size_t route_deviation = 0;
  std::size_t stuck = 0;

  std::size_t discarded() const { return collision + off_road + route_deviation + stuck; }
  bool operator==(const FilterStats&) const = default;
};

struct DatasetManifest {
  std::string kind = "demo";  // demo | takeover
  std::size_t count = 0;
  std::uint64_t vocab_hash = 0;  // 0 when labels do not depend on a vocabulary yet
  int round = 0;
  std::map<int, std::size_t> round_counts;
  FilterStats filter;
  std::vector<std::string> sources;

  bool operator==(const DatasetManifest&) const = default;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void validate(const DemoSample& s, const policy::ControlVocabulary& cv) {
  for (int g = 0; g < 3; ++g) {
    const auto grp = static_cast<policy::ControlGroup>(g);
    const int i = s.ctrl[grp];
    if (i < 0 || static_cast<std::size_t>(i) >= cv.group_size(grp))
      throw DatasetError("sample " + s.scenario_id + "@" + std::to_string(s.time) + ": " +
                         std::string(to_string(grp)) + " index " + std::to_string(i) + " out of range");
  }
}

// ---- JSON ----

inline json to_json(const policy::SceneFeatures& f) {
  return {{"agents", f.agents}, {"map", f.map}, {"command", std::string(sim::to_string(f.command))},
          {"ego_speed", f.ego_speed}};
}

inline policy::SceneFeatures features_from_json(const json& j) {
  policy::SceneFeatures f;
  f.agents = j.at("agents").get<std::vector<policy::AgentRow>>();
  f.map = j.at("map").get<std::vector<policy::MapRow>>();
  f.command = sim::nav_command_from(j.at("command").get<std::string>());
  f.ego_speed = j.at("ego_speed").get<double>();
  return f;
}

inline json to_json(const DemoSample& s) {
  return {{"features", to_json(s.features)},
          {"expert_traj", s.expert_traj},
          {"ctrl", {s.ctrl.throttle, s.ctrl.brake, s.ctrl.steer}},
          {"scenario", s.scenario_id},
          {"time", s.time}};
}

inline DemoSample demo_from_json(const json& j) {
  DemoSample s;
  s.features = features_from_json(j.at("features"));
  s.expert_traj = j.at("expert_traj").get<policy::TrajVec>();
  const auto c = j.at("ctrl").get<std::array<int, 3>>();
  s.ctrl = {c[0], c[1], c[2]};
  s.scenario_id = j.at("scenario").get<std::string>();
  s.time = j.at("time").get<double>();
  return s;
}

inline json to_json(const TakeoverSample& s) {
  json j = to_json(s.sample);
  const auto& i = s.info;
  j["takeover"] = {{"trigger", std::string(to_string(i.trigger))},
                   {"segment", i.segment},
                   {"frame", i.frame},
                   {"steer_gap", i.steer_gap},
                   {"policy_traj", i.policy_traj},
                   {"policy_ctrl", {i.policy_ctrl.throttle, i.policy_ctrl.brake, i.policy_ctrl.steer}},
                   {"round", i.round},
                   {"truncated", i.truncated}};
  return j;
}

inline TakeoverSample takeover_from_json(const json& j) {
  TakeoverSample s;
  s.sample = demo_from_json(j);
  const json& t = j.at("takeover");
  auto& i = s.info;
  i.trigger = trigger_kind_from(t.at("trigger").get<std::string>());
  i.segment = t.at("segment").get<int>();
  i.frame = t.at("frame").get<int>();
  i.steer_gap = t.at("steer_gap").get<double>();
  i.policy_traj = t.at("policy_traj").get<int>();
  const auto c = t.at("policy_ctrl").get<std::array<int, 3>>();
  i.policy_ctrl = {c[0], c[1], c[2]};
  i.round = t.at("round").get<int>();
  i.truncated = t.at("truncated").get<bool>();
  return s;
}

inline json to_json(const FilterStats& f) {
  return {{"raw_segments", f.raw_segments}, {"kept", f.kept},       {"collision", f.collision},
          {"off_road", f.off_road},         {"route_deviation", f.route_deviation}, {"stuck", f.stuck}};
}

inline FilterStats filter_stats_from_json(const json& j) {
  FilterStats f;
  f.raw_segments = j.at("raw_segments").get<std::size_t>();
  f.kept = j.at("kept").get<std::size_t>();
  f.collision = j.at("collision").get<std::size_t>();
  f.off_road = j.at("off_road").get<std::size_t>();
  f.route_deviation = j.at("route_deviation").get<std::size_t>();
  f.stuck = j.at("stuck").get<std::size_t>();
  return f;
}

inline json to_json(const DatasetManifest& m) {
  json rc = json::object();
  for (const auto& [r, n] : m.round_counts) rc[std::to_string(r)] = n;
  return {{"format", kDatasetFormat},
          {"kind", m.kind},
          {"count", m.count},
          {"vocab_hash", hex64(m.vocab_hash)},
          {"round", m.round},
          {"round_counts", rc},
          {"filter", to_json(m.filter)},
          {"sources", m.sources}};
}

inline DatasetManifest manifest_from_json(const json& j) {
  if (j.at("format").get<std::string>() != kDatasetFormat) throw std::invalid_argument("unsupported dataset format");
  DatasetManifest m;
  m.kind = j.at("kind").get<std::string>();
  if (m.kind != "demo" && m.kind != "takeover") throw std::invalid_argument("unknown dataset kind '" + m.kind + "'");
  m.count = j.at("count").get<std::size_t>();
  m.vocab_hash = std::stoull(j.at("vocab_hash").get<std::string>(), nullptr, 16);
  m.round = j.at("round").get<int>();
  for (const auto& [k, v] : j.at("round_counts").items()) m.round_counts[std::stoi(k)] = v.get<std::size_t>();
  m.filter = filter_stats_from_json(j.at("filter"));
  m.sources = j.at("sources").get<std::vector<std::string>>();
  return m;
}

// ---- persistence: a manifest line, then one sample per line ----

template <class Sample>
std::string serialize_dataset(DatasetManifest m, const std::vector<Sample>& samples) {
  m.count = samples.size();
  std::string out = json{{"manifest", to_json(m)}}.dump();
  out += '\n';
  for (const auto& s : samples) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

template <class Sample>
void persist(const std::string& path, const DatasetManifest& m, const std::vector<Sample>& samples) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DatasetError("cannot write dataset: " + path);
  f << serialize_dataset(m, samples);
  if (!f) throw DatasetError("write failed: " + path);
}

template <class Sample>
struct Dataset {
  DatasetManifest manifest;
  std::vector<Sample> samples;
};

template <class Sample, class Parse>
Dataset<Sample> parse_dataset(std::istream& in, const std::string& where, Parse parse,
                              std::optional<std::uint64_t> expected_hash) {
  Dataset<Sample> d;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](std::size_t ln, const std::string& msg) -> DatasetError {
    return DatasetError(where + ":" + std::to_string(ln) + ": " + msg);
  };
  if (!std::getline(in, line)) throw fail(1, "missing manifest line");
  ++lineno;
  try {
    d.manifest = manifest_from_json(json::parse(line).at("manifest"));
  } catch (const std::exception& e) {
    throw fail(lineno, std::string("bad manifest: ") + e.what());
  }
  if (expected_hash && d.manifest.vocab_hash != *expected_hash)
    throw fail(lineno, "vocabulary hash " + hex64(d.manifest.vocab_hash) + " does not match " + hex64(*expected_hash));
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      d.samples.push_back(parse(json::parse(line)));
    } catch (const std::exception& e) {
      throw fail(lineno, e.what());
    }
  }
  if (d.samples.size() != d.manifest.count)
    throw fail(lineno + 1, "truncated: manifest declares " + std::to_string(d.manifest.count) + " samples, found " +
                               std::to_string(d.samples.size()));
  return d;
}

inline Dataset<DemoSample> load_demos(const std::string& path, std::optional<std::uint64_t> expected_hash = {}) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetError("cannot read dataset: " + path);
  return parse_dataset<DemoSample>(f, path, demo_from_json, expected_hash);
}

inline Dataset<TakeoverSample> load_takeovers(const std::string& path,
                                              std::optional<std::uint64_t> expected_hash = {}) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetError("cannot read dataset: " + path);
  auto d = parse_dataset<TakeoverSample>(f, path, takeover_from_json, expected_hash);
  if (d.manifest.kind != "takeover") throw DatasetError(path + ":1: expected a takeover dataset");
  return d;
}

// ---- DAgger aggregation ----

struct DaggerDataset {
  std::vector<DemoSample> samples;
  std::vector<double> weights;  // per sample, demo 1, takeover `takeover_weight`
  std::size_t demo_count = 0;
  std::uint64_t vocab_hash = 0;
  DatasetManifest manifest;
};

// Multiset union of the demonstrations with every takeover round so far.
inline DaggerDataset merge_dagger_dataset(const std::vector<DemoSample>& demos,
                                          const std::vector<Dataset<TakeoverSample>>& rounds, std::uint64_t vocab_hash,
                                          double takeover_weight = 4.0) {
  if (!(takeover_weight > 0.0)) throw std::invalid_argument("merge_dagger_dataset: takeover weight must be > 0");
  DaggerDataset d;
  d.vocab_hash = vocab_hash;
  d.samples = demos;
  d.weights.assign(demos.size(), 1.0);
  d.demo_count = demos.size();
  d.manifest.kind = "demo";
  d.manifest.vocab_hash = vocab_hash;
  d.manifest.round_counts[0] = demos.size();
  for (const auto& r : rounds) {
    if (r.manifest.vocab_hash != vocab_hash)
      throw DatasetError("merge_dagger_dataset: round " + std::to_string(r.manifest.round) + " vocabulary hash " +
                         hex64(r.manifest.vocab_hash) + " does not match " + hex64(vocab_hash));
    for (const auto& s : r.samples) {
      d.samples.push_back(s.sample);
      d.weights.push_back(takeover_weight);
    }
    d.manifest.round_counts[r.manifest.round] += r.samples.size();
    for (const auto& src : r.manifest.sources) d.manifest.sources.push_back(src);
  }
  d.manifest.count = d.samples.size();
  return d;
}

// Independent draws proportional to the sample weights.
class WeightedSampler {
 public:
  explicit WeightedSampler(const std::vector<double>& weights) {
    double c = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("WeightedSampler: negative weight");
      c += w;
      cum_.push_back(c);
    }
    if (!(c > 0.0)) throw std::invalid_argument("WeightedSampler: no positive weight");
  }
  std::size_t draw(Rng& rng) const {
    const double r = rng.uniform() * cum_.back();
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), r);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cum_.begin()), cum_.size() - 1);
  }

 private:
  std::vector<double> cum_;
};

// One epoch's index list: each sample repeated round(weight) times, then
// shuffled with a seed-determined order.
inline std::vector<std::size_t> epoch_indices(const std::vector<double>& weights, std::uint64_t seed) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto reps = static_cast<std::size_t>(std::llround(weights[i]));
    for (std::size_t r = 0; r < reps; ++r) idx.push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(idx);
  return idx;
}

}  // namespace takead::data

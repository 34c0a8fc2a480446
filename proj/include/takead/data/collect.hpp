#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>

#include "takead/data/dataset.hpp"
#include "takead/policy/agent.hpp"
#include "takead/simworld/parallel.hpp"

namespace takead::data {

// Seed ranges of the three suites. They never overlap.
inline constexpr std::uint64_t kTrainSeedBase = 1000;
inline constexpr std::uint64_t kValidationSeedBase = 2000;
inline constexpr std::uint64_t kTestSeedBase = 3000;

inline std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = base + i;
  return s;
}

inline bool is_test_seed(std::uint64_t s) { return s >= kTestSeedBase && s < kTestSeedBase + 1000; }

inline void require_training_suite(const std::vector<sim::ScenarioSpec>& suite, const char* op) {
  for (const auto& s : suite)
    if (is_test_seed(s.seed))
      throw std::invalid_argument(std::string(op) + ": test-suite scenario " + s.id + " in a collection suite");
}

class CollectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DemoConfig {
  expert::ExpertConfig expert;
  policy::SceneConfig scene;
  policy::ControlVocabulary cvocab;
  int stride = 1;  // keep every n-th tick
  double max_discard_rate = 0.2;
  int jobs = 1;
};

struct DemoEpisode {
  std::string scenario_id;
  std::vector<DemoSample> samples;
  std::vector<sim::InfractionEvent> infractions;
};

inline DemoEpisode demo_episode(const sim::ScenarioSpec& spec, const DemoConfig& cfg) {
  DemoEpisode ep;
  ep.scenario_id = spec.id;
  sim::World w = sim::reset(spec);
  while (!w.done()) {
    const auto label = expert::expert_act(w, cfg.expert, cfg.cvocab);
    if (w.tick % cfg.stride == 0)
      ep.samples.push_back({policy::extract_features(w, cfg.scene), policy::flatten(label.trajectory), label.indices,
                            spec.id, w.time});
    sim::advance_world(w, label.command);
  }
  ep.infractions = w.infractions;
  return ep;
}

struct DemoCollection {
  std::vector<DemoSample> samples;
  std::size_t episodes = 0;
  std::vector<std::string> discarded;  // scenario ids with any infraction
};

// Episodes with any infraction are dropped whole; too many drops means the
// expert is misconfigured.
inline DemoCollection assemble_demos(const std::vector<DemoEpisode>& eps, double max_discard_rate) {
  DemoCollection out;
  out.episodes = eps.size();
  for (const auto& ep : eps) {
    if (!ep.infractions.empty()) {
      out.discarded.push_back(ep.scenario_id);
      continue;
    }
    out.samples.insert(out.samples.end(), ep.samples.begin(), ep.samples.end());
  }
  if (!eps.empty() && static_cast<double>(out.discarded.size()) > max_discard_rate * static_cast<double>(eps.size()))
    throw CollectionError("collect_demos: expert infractions in " + std::to_string(out.discarded.size()) + " of " +
                          std::to_string(eps.size()) + " episodes; expert misconfigured");
  return out;
}

inline DemoCollection collect_demos(const std::vector<sim::ScenarioSpec>& suite, const DemoConfig& cfg = {}) {
  require_training_suite(suite, "collect_demos");
  if (cfg.stride < 1) throw std::invalid_argument("collect_demos: stride must be >= 1");
  const auto eps = sim::parallel_map(suite.size(), cfg.jobs, [&](std::size_t i) { return demo_episode(suite[i], cfg); });
  return assemble_demos(eps, cfg.max_discard_rate);
}

// ---- shadow mode ----

struct ShadowConfig {
  expert::ExpertConfig expert;
  policy::SceneConfig scene;
  policy::ControlVocabulary cvocab;
  double forecast_horizon = 2.0;  // s
  double steer_threshold = 0.2;   // epsilon_steer
  int segment_frames = 40;        // 2 s at 20 Hz
  int suppress_frames = 20;       // 1 s after handback
  double stop_line_reach = 10.0;  // m; segments this close to a stop line are never "stuck"
  int round = 0;
  int jobs = 1;
};

struct TakeoverSegment {
  int id = 0;
  std::string scenario_id;
  TriggerKind trigger = TriggerKind::Threshold;
  double steer_gap = 0.0;
  std::int64_t start_tick = 0;
  bool truncated = false;
  bool near_stop_line = false;
  std::vector<TakeoverSample> frames;

  double start_time() const { return frames.empty() ? 0.0 : frames.front().sample.time; }
  // Events logged while applying the last frame's command carry this time.
  double end_time() const { return frames.empty() ? 0.0 : frames.back().sample.time + sim::kDt; }
  double mean_speed() const {
    double s = 0.0;
    for (const auto& f : frames) s += f.sample.features.ego_speed;
    return frames.empty() ? 0.0 : s / static_cast<double>(frames.size());
  }
};

struct ShadowEpisode {
  std::string scenario_id;
  std::vector<TakeoverSegment> segments;
  std::vector<sim::InfractionEvent> infractions;
  sim::Termination termination = sim::Termination::Running;
  std::vector<std::int64_t> trigger_ticks;
};

// Policy and expert both compute a command every tick. While no segment is
// active the policy drives; a trigger hands control to the expert for a
// fixed number of frames, each recorded with the expert's labels.
inline ShadowEpisode shadow_episode(const sim::ScenarioSpec& spec, policy::Driver& driver, const ShadowConfig& cfg) {
  ShadowEpisode ep;
  ep.scenario_id = spec.id;
  sim::World w = sim::reset(spec);
  driver.begin_episode(w);
  int remaining = 0;
  std::int64_t suppress_until = 0;
  TakeoverSegment seg;
  auto close_segment = [&](bool truncated) {
    seg.truncated = truncated;
    for (auto& f : seg.frames) f.info.truncated = truncated;
    ep.segments.push_back(std::move(seg));
    seg = {};
  };
  while (!w.done()) {
    const sim::ControlCommand pol = driver.act(w);
    const auto label = expert::expert_act(w, cfg.expert, cfg.cvocab);
    if (remaining == 0 && w.tick >= suppress_until) {
      const double gap = std::abs(pol.clamped().steer - label.command.clamped().steer);
      std::optional<TriggerKind> trig;
      if (expert::forecast_collision(w, cfg.forecast_horizon)) {
        trig = TriggerKind::Collision;
      } else if (gap > cfg.steer_threshold) {
        trig = TriggerKind::Threshold;
      }
      if (trig) {
        remaining = cfg.segment_frames;
        seg.id = static_cast<int>(ep.segments.size());
        seg.scenario_id = spec.id;
        seg.trigger = *trig;
        seg.steer_gap = gap;
        seg.start_tick = w.tick;
        ep.trigger_ticks.push_back(w.tick);
      }
    }
    if (remaining > 0) {
      TakeoverSample s;
      s.sample = {policy::extract_features(w, cfg.scene), policy::flatten(label.trajectory), label.indices, spec.id,
                  w.time};
      s.info.trigger = seg.trigger;
      s.info.frame = static_cast<int>(seg.frames.size());
      s.info.steer_gap = seg.steer_gap;
      s.info.round = cfg.round;
      if (const auto* po = driver.last_policy_output()) {
        s.info.policy_traj = static_cast<int>(po->traj_index);
        s.info.policy_ctrl = po->ctrl_index;
      }
      if (const auto line = w.active_stop_line(); line && *line - w.front_s() <= cfg.stop_line_reach)
        seg.near_stop_line = true;
      seg.frames.push_back(std::move(s));
      sim::advance_world(w, label.command);
      if (--remaining == 0) {
        close_segment(false);
        suppress_until = w.tick + cfg.suppress_frames;
      }
    } else {
      sim::advance_world(w, pol);
    }
  }
  if (remaining > 0) close_segment(true);
  ep.infractions = w.infractions;
  ep.termination = w.termination;
  return ep;
}

struct FilterResult {
  std::vector<TakeoverSegment> kept;
  FilterStats stats;
};

using InfractionLogs = std::map<std::string, std::vector<sim::InfractionEvent>>;

// Drops segments in which the expert itself misbehaved, judged from the
// episode's infraction log: collisions or off-road events inside the
// segment, route deviation, or a stuck expert away from any stop line.
inline FilterResult filter_takeovers(const std::vector<TakeoverSegment>& raw, const InfractionLogs& logs) {
  FilterResult r;
  r.stats.raw_segments = raw.size();
  static const std::vector<sim::InfractionEvent> none;
  for (const auto& seg : raw) {
    const auto it = logs.find(seg.scenario_id);
    const auto& log = it == logs.end() ? none : it->second;
    bool collision = false, off_road = false, deviation = false;
    for (const auto& e : log) {
      if (e.time <= seg.start_time() + 1e-9 || e.time > seg.end_time() + 1e-9) continue;
      collision |= sim::is_collision(e.kind);
      off_road |= e.kind == sim::InfractionKind::OffRoad;
      deviation |= e.kind == sim::InfractionKind::RouteDeviation;
    }
    if (collision) {
      ++r.stats.collision;
    } else if (off_road) {
      ++r.stats.off_road;
    } else if (deviation) {
      ++r.stats.route_deviation;
    } else if (seg.mean_speed() < sim::kStillSpeed && !seg.near_stop_line) {
      ++r.stats.stuck;
    } else {
      r.kept.push_back(seg);
    }
  }
  r.stats.kept = r.kept.size();
  return r;
}

struct ShadowCollection {
  std::vector<ShadowEpisode> episodes;
  FilterResult filtered;
  Dataset<TakeoverSample> dataset;  // kept segments, flattened

  std::size_t count(TriggerKind k) const {
    std::size_t n = 0;
    for (const auto& s : filtered.kept) n += s.trigger == k;
    return n;
  }
};

using DriverFactory = std::function<std::unique_ptr<policy::Driver>()>;

// Runs every scenario in shadow mode (episodes in parallel, merged in suite
// order), filters, and numbers the kept segments globally.
inline ShadowCollection run_shadow_collection(const std::vector<sim::ScenarioSpec>& suite, const DriverFactory& make,
                                              const ShadowConfig& cfg, std::uint64_t vocab_hash) {
  require_training_suite(suite, "run_shadow_collection");
  ShadowCollection out;
  out.episodes = sim::parallel_map(suite.size(), cfg.jobs, [&](std::size_t i) {
    auto d = make();
    return shadow_episode(suite[i], *d, cfg);
  });
  std::vector<TakeoverSegment> raw;
  InfractionLogs logs;
  for (const auto& ep : out.episodes) {
    logs[ep.scenario_id] = ep.infractions;
    for (const auto& s : ep.segments) raw.push_back(s);
  }
  out.filtered = filter_takeovers(raw, logs);
  int next = 0;
  for (auto& seg : out.filtered.kept) {
    seg.id = next++;
    for (auto& f : seg.frames) {
      f.info.segment = seg.id;
      out.dataset.samples.push_back(f);
    }
  }
  auto& m = out.dataset.manifest;
  m.kind = "takeover";
  m.count = out.dataset.samples.size();
  m.vocab_hash = vocab_hash;
  m.round = cfg.round;
  m.round_counts[cfg.round] = m.count;
  m.filter = out.filtered.stats;
  return out;
}

}  // namespace takead::data

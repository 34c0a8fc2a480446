#pragma once

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "takead/policy/agent.hpp"
#include "takead/simworld/io.hpp"
#include "takead/simworld/parallel.hpp"

namespace takead::bench {

using json = nlohmann::json;
using Trace = std::vector<sim::FrameRecord>;

struct EpisodeResult {
  std::string scenario_id;
  sim::ScenarioKind kind = sim::ScenarioKind::EmergencyBrake;
  std::uint64_t seed = 0;
  double rc = 0.0;
  double is = 1.0;
  double ds = 0.0;
  bool success = false;
  bool timed_out = false;  // timeout or blocked
  sim::Termination termination = sim::Termination::Running;
  double elapsed = 0.0;
  std::vector<sim::InfractionEvent> infractions;
  double efficiency = 0.0;
  double comfort = 0.0;
  int creep_ticks = 0;
  Trace trace;  // kept only on request
};

struct ComfortLimits {
  double accel = 3.0;     // m/s^2
  double jerk = 5.0;      // m/s^3
  double yaw_rate = 0.6;  // rad/s
};

// Mean over frames of min(1, v_ego / v_ref) * 100. v_ref is the mean speed of
// actors within `radius` when any of them moves, else the speed limit.
inline double efficiency(const Trace& trace, double speed_limit, double radius = 50.0) {
  if (trace.empty()) throw std::invalid_argument("efficiency: empty trace");
  double sum = 0.0;
  for (const auto& f : trace) {
    double vs = 0.0;
    int n = 0;
    bool moving = false;
    for (const auto& a : f.actors) {
      if ((a.position() - f.ego.position()).norm() > radius) continue;
      vs += a.speed;
      ++n;
      moving |= a.speed > sim::kStillSpeed;
    }
    const double ref = moving ? vs / n : speed_limit;
    sum += std::min(1.0, std::max(0.0, f.ego.speed) / ref);
  }
  return 100.0 * sum / static_cast<double>(trace.size());
}

// Percentage of frames (from the third on, where jerk is defined) whose
// finite-difference accel, jerk and yaw rate stay inside the limits.
inline double comfortness(const Trace& trace, const ComfortLimits& lim = {}) {
  if (trace.size() < 3) throw std::invalid_argument("comfortness: need at least 3 frames");
  std::size_t ok = 0;
  for (std::size_t i = 2; i < trace.size(); ++i) {
    const double dt1 = trace[i].time - trace[i - 1].time;
    const double dt0 = trace[i - 1].time - trace[i - 2].time;
    const double a1 = (trace[i].ego.speed - trace[i - 1].ego.speed) / dt1;
    const double a0 = (trace[i - 1].ego.speed - trace[i - 2].ego.speed) / dt0;
    const double jerk = (a1 - a0) / dt1;
    const double yaw = sim::normalize_angle(trace[i].ego.heading - trace[i - 1].ego.heading) / dt1;
    ok += std::abs(a1) <= lim.accel && std::abs(jerk) <= lim.jerk && std::abs(yaw) <= lim.yaw_rate;
  }
  return 100.0 * static_cast<double>(ok) / static_cast<double>(trace.size() - 2);
}

inline sim::FrameRecord frame_of(const sim::World& w, const sim::ControlCommand& cmd,
                                 std::vector<sim::InfractionEvent> events) {
  return {w.time, w.ego, w.actors, cmd, std::move(events), w.progress};
}

struct RunOptions {
  bool keep_trace = false;
};

inline EpisodeResult run_closed_loop(policy::Driver& driver, const sim::ScenarioSpec& spec, const RunOptions& opt = {}) {
  sim::World w = sim::reset(spec);
  driver.begin_episode(w);
  Trace trace;
  trace.push_back(frame_of(w, {}, {}));
  EpisodeResult r;
  auto* pd = dynamic_cast<policy::PolicyDriver*>(&driver);
  while (!w.done()) {
    const sim::ControlCommand cmd = driver.act(w);
    if (pd && pd->creep_active()) ++r.creep_ticks;
    auto ev = sim::advance_world(w, cmd);
    trace.push_back(frame_of(w, cmd, std::move(ev)));
  }
  r.scenario_id = spec.id;
  r.kind = spec.kind;
  r.seed = spec.seed;
  r.rc = sim::route_completion(w);
  r.is = sim::infraction_score(w.infractions);
  r.ds = 100.0 * r.rc * r.is;
  r.termination = w.termination;
  r.timed_out = w.termination == sim::Termination::Timeout || w.termination == sim::Termination::Blocked;
  r.success = w.termination == sim::Termination::RouteComplete && r.rc >= 0.99 && r.is == 1.0;
  r.elapsed = w.time;
  r.infractions = w.infractions;
  r.efficiency = efficiency(trace, spec.route.speed_limit);
  r.comfort = comfortness(trace);
  if (opt.keep_trace) r.trace = std::move(trace);
  return r;
}

using DriverFactory = std::function<std::unique_ptr<policy::Driver>()>;

// One driver per episode, episodes in parallel, results in suite order.
inline std::vector<EpisodeResult> evaluate_suite(const DriverFactory& make, const std::vector<sim::ScenarioSpec>& suite,
                                                 int jobs = 1, const RunOptions& opt = {}) {
  return sim::parallel_map(suite.size(), jobs, [&](std::size_t i) {
    auto d = make();
    return run_closed_loop(*d, suite[i], opt);
  });
}

inline DriverFactory policy_factory(const policy::Policy& p, policy::CreepConfig creep = {},
                                    policy::PidConfig pid = {}) {
  return [&p, creep, pid] { return std::make_unique<policy::PolicyDriver>(p, creep, pid); };
}

struct AbilityStats {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double mean_ds = 0.0;
  double sr() const { return episodes ? 100.0 * static_cast<double>(successes) / static_cast<double>(episodes) : 0.0; }
};

struct SuiteReport {
  std::size_t episodes = 0;
  double mean_ds = 0.0;
  double sr = 0.0;  // %
  double mean_rc = 0.0;  // %
  double mean_is = 0.0;
  double efficiency = 0.0;
  double comfort = 0.0;
  double timeout_rate = 0.0;  // %
  std::map<std::string, AbilityStats> abilities;
  std::string config_hash;
  std::string checkpoint_hash;
  std::vector<EpisodeResult> results;
};

inline SuiteReport summarize(const std::vector<EpisodeResult>& results, std::string config_hash = "",
                             std::string checkpoint_hash = "") {
  if (results.empty()) throw std::invalid_argument("summarize: no episodes");
  SuiteReport s;
  s.episodes = results.size();
  std::size_t succ = 0, to = 0;
  for (const auto& r : results) {
    s.mean_ds += r.ds;
    s.mean_rc += 100.0 * r.rc;
    s.mean_is += r.is;
    s.efficiency += r.efficiency;
    s.comfort += r.comfort;
    succ += r.success;
    to += r.timed_out;
    auto& a = s.abilities[std::string(sim::to_string(r.kind))];
    ++a.episodes;
    a.successes += r.success;
    a.mean_ds += r.ds;
  }
  const double n = static_cast<double>(results.size());
  s.mean_ds /= n;
  s.mean_rc /= n;
  s.mean_is /= n;
  s.efficiency /= n;
  s.comfort /= n;
  s.sr = 100.0 * static_cast<double>(succ) / n;
  s.timeout_rate = 100.0 * static_cast<double>(to) / n;
  for (auto& [k, a] : s.abilities) a.mean_ds /= static_cast<double>(a.episodes);
  s.config_hash = std::move(config_hash);
  s.checkpoint_hash = std::move(checkpoint_hash);
  s.results = results;
  for (auto& r : s.results) r.trace.clear();
  return s;
}

inline json to_json(const EpisodeResult& r) {
  json inf = json::array();
  for (const auto& e : r.infractions)
    inf.push_back({{"kind", std::string(sim::to_string(e.kind))}, {"time", e.time}, {"penalty", e.penalty}});
  return {{"scenario", r.scenario_id},
          {"kind", std::string(sim::to_string(r.kind))},
          {"seed", r.seed},
          {"rc", r.rc},
          {"is", r.is},
          {"ds", r.ds},
          {"success", r.success},
          {"timed_out", r.timed_out},
          {"termination", std::string(sim::to_string(r.termination))},
          {"elapsed", r.elapsed},
          {"efficiency", r.efficiency},
          {"comfort", r.comfort},
          {"creep_ticks", r.creep_ticks},
          {"infractions", inf}};
}

inline json to_json(const SuiteReport& s) {
  json ab = json::object();
  for (const auto& [k, a] : s.abilities)
    ab[k] = {{"episodes", a.episodes}, {"successes", a.successes}, {"sr", a.sr()}, {"mean_ds", a.mean_ds}};
  json eps = json::array();
  for (const auto& r : s.results) eps.push_back(to_json(r));
  return {{"episodes", s.episodes},
          {"ds", s.mean_ds},
          {"sr", s.sr},
          {"rc", s.mean_rc},
          {"is", s.mean_is},
          {"efficiency", s.efficiency},
          {"comfort", s.comfort},
          {"timeout_rate", s.timeout_rate},
          {"abilities", ab},
          {"config_hash", s.config_hash},
          {"checkpoint_hash", s.checkpoint_hash},
          {"results", eps}};
}

inline std::string fixed(double v, int prec = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

inline std::string table(const SuiteReport& s) {
  std::ostringstream os;
  auto row = [&](const std::string& k, const std::string& v) { os << std::left << std::setw(16) << k << v << '\n'; };
  row("episodes", std::to_string(s.episodes));
  row("DS", fixed(s.mean_ds));
  row("SR (%)", fixed(s.sr));
  row("RC (%)", fixed(s.mean_rc));
  row("IS", fixed(s.mean_is, 3));
  row("Efficiency", fixed(s.efficiency));
  row("Comfortness", fixed(s.comfort));
  row("TO (%)", fixed(s.timeout_rate));
  os << '\n' << std::left << std::setw(16) << "ability" << std::setw(10) << "episodes" << std::setw(10) << "SR (%)"
     << "DS\n";
  for (const auto& [k, a] : s.abilities)
    os << std::left << std::setw(16) << k << std::setw(10) << a.episodes << std::setw(10) << fixed(a.sr())
       << fixed(a.mean_ds) << '\n';
  if (!s.checkpoint_hash.empty()) row("checkpoint", s.checkpoint_hash);
  if (!s.config_hash.empty()) row("config", s.config_hash);
  return os.str();
}

// Round index against DS/SR, one line per round (round 0 is the pretrained policy).
inline std::string trend_csv(const std::vector<std::pair<int, SuiteReport>>& rounds) {
  std::ostringstream os;
  os << "round,ds,sr\n";
  for (const auto& [i, s] : rounds) os << i << ',' << fixed(s.mean_ds, 4) << ',' << fixed(s.sr, 4) << '\n';
  return os.str();
}

}  // namespace takead::bench

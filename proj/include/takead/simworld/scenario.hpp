#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "takead/diffnum/random.hpp"
#include "takead/simworld/route.hpp"
#include "takead/simworld/types.hpp"

namespace takead::sim {

enum class ScenarioKind : int { EmergencyBrake = 0, Overtaking, GiveWay, Merging, StopSign };
inline constexpr std::size_t kScenarioKindCount = 5;
inline constexpr std::array<std::string_view, kScenarioKindCount> kScenarioKindNames{
    "EmergencyBrake", "Overtaking", "GiveWay", "Merging", "StopSign"};
inline constexpr std::array<ScenarioKind, kScenarioKindCount> kAllScenarioKinds{
    ScenarioKind::EmergencyBrake, ScenarioKind::Overtaking, ScenarioKind::GiveWay, ScenarioKind::Merging,
    ScenarioKind::StopSign};

inline std::string_view to_string(ScenarioKind k) { return kScenarioKindNames[static_cast<std::size_t>(k)]; }
inline ScenarioKind scenario_kind_from(std::string_view s) {
  for (std::size_t i = 0; i < kScenarioKindCount; ++i)
    if (kScenarioKindNames[i] == s) return static_cast<ScenarioKind>(i);
  throw std::invalid_argument("unknown scenario kind '" + std::string(s) + "'");
}

struct ActorSpec {
  ActorKind kind = ActorKind::Vehicle;
  double length = 4.6;
  double width = 2.0;
  std::vector<Vec2> path;  // followed by arc length, extended past its end
  double start_s = 0.0;
  double initial_speed = 0.0;
  ActorScript script;
  double trigger_jitter = 0.0;  // trigger distance drawn from +-jitter at reset
};

struct ScenarioSpec {
  std::string id;
  ScenarioKind kind = ScenarioKind::EmergencyBrake;
  std::uint64_t seed = 0;
  Route route;
  double ego_initial_speed = 0.0;
  std::vector<ActorSpec> actors;
  std::optional<double> stop_line_s;
};

inline std::string scenario_id(ScenarioKind kind, std::uint64_t seed) {
  return std::string(to_string(kind)) + "_" + std::to_string(seed);
}

namespace detail {

// Straight or gently curved lead-in shared by all kinds.
inline void lead_in(RouteBuilder& b, Rng& rng) {
  b.straight(rng.uniform(15.0, 30.0), NavCommand::LaneFollow);
  if (rng.uniform() < 0.6) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    b.arc(rng.uniform(35.0, 70.0), sign * rng.uniform(0.2, 0.6), NavCommand::LaneFollow);
  }
}

}  // namespace detail

// Desk-scale scenario generator. The seed fixes geometry, speeds and the
// trigger-distance jitter.
inline ScenarioSpec make_scenario(ScenarioKind kind, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 17 + static_cast<std::uint64_t>(kind)));
  ScenarioSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  spec.id = scenario_id(kind, seed);
  const double speed_limit = rng.uniform(7.5, 9.0);
  spec.ego_initial_speed = rng.uniform(3.0, 6.0);

  RouteBuilder b;
  detail::lead_in(b, rng);

  switch (kind) {
    case ScenarioKind::EmergencyBrake: {
      b.straight(rng.uniform(80.0, 100.0), NavCommand::LaneFollow);
      b.straight(25.0, NavCommand::LaneFollow);
      spec.route = b.build(speed_limit);
      ActorSpec lead;
      lead.path = spec.route.path.points();
      lead.start_s = rng.uniform(24.0, 32.0);
      lead.initial_speed = rng.uniform(5.5, 7.0);
      lead.script = {ScriptType::BrakeOnTrigger, lead.initial_speed, 20.0, 6.0, 2.0, rng.uniform(3.0, 5.0)};
      lead.trigger_jitter = 3.0;
      spec.actors.push_back(lead);
      break;
    }
    case ScenarioKind::Overtaking: {
      b.straight(rng.uniform(10.0, 20.0), NavCommand::LaneFollow);
      const Vec2 shift_start = b.position();
      const double h = b.heading();
      b.shift(18.0, 3.5, NavCommand::ChangeLaneLeft);
      b.straight(14.0, NavCommand::LaneFollow);
      b.shift(18.0, -3.5, NavCommand::ChangeLaneRight);
      b.straight(30.0, NavCommand::LaneFollow);
      spec.route = b.build(speed_limit);
      ActorSpec parked;
      parked.kind = rng.uniform() < 0.5 ? ActorKind::Vehicle : ActorKind::Static;
      if (parked.kind == ActorKind::Static) parked.length = 3.0;
      const Vec2 c = shift_start + unit(h) * 25.0;
      parked.path = {c, c + unit(h)};
      parked.script = {ScriptType::Static, 0.0, 0.0, 0.0, 0.0, 0.0};
      spec.actors.push_back(parked);
      break;
    }
    case ScenarioKind::GiveWay: {
      b.straight(rng.uniform(25.0, 35.0), NavCommand::LaneFollow);
      const double s_cross = b.length_so_far() + 5.0;
      b.straight(10.0, NavCommand::Straight);
      b.straight(30.0, NavCommand::LaneFollow);
      spec.route = b.build(speed_limit);
      const Vec2 c = spec.route.path.point_at(s_cross);
      const double h = spec.route.path.heading_at(s_cross);
      const double side = rng.uniform() < 0.5 ? 1.0 : -1.0;
      const Vec2 left = unit(h + 0.5 * std::numbers::pi);
      ActorSpec ped;
      ped.kind = ActorKind::Pedestrian;
      ped.length = 0.6;
      ped.width = 0.6;
      ped.path = {c + left * (5.5 * side), c - left * (5.5 * side)};
      const double walk = rng.uniform(1.2, 1.6);
      ped.script = {ScriptType::StartOnTrigger, walk, rng.uniform(19.0, 23.0), 0.0, 20.0, 0.0};
      ped.trigger_jitter = 1.5;
      spec.actors.push_back(ped);
      break;
    }
    case ScenarioKind::Merging: {
      b.straight(rng.uniform(5.0, 15.0), NavCommand::LaneFollow);
      const double s_merge = b.length_so_far() + rng.uniform(40.0, 50.0);
      b.straight(110.0, NavCommand::LaneFollow);
      spec.route = b.build(speed_limit);
      // On-ramp from the right that joins the ego lane at s_merge.
      ActorSpec merger;
      const double ramp = 25.0;
      for (int i = 0; i <= 25; ++i) {
        const double t = static_cast<double>(i) / 25.0;
        const double s = s_merge - ramp + ramp * t;
        const double lat = -7.0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
        const Vec2 p = spec.route.path.point_at(s);
        const double h = spec.route.path.heading_at(s);
        merger.path.push_back(p + unit(h + 0.5 * std::numbers::pi) * lat);
      }
      for (double s = s_merge + 2.0; s < spec.route.length() + 40.0; s += 2.0)
        merger.path.push_back(spec.route.path.point_at(s));
      merger.script = {ScriptType::StartOnTrigger, rng.uniform(5.0, 6.5), rng.uniform(30.0, 36.0), 0.0, 2.5, 0.0};
      merger.trigger_jitter = 2.0;
      spec.actors.push_back(merger);
      break;
    }
    case ScenarioKind::StopSign: {
      const double approach = rng.uniform(30.0, 45.0);
      const NavCommand turn = rng.uniform() < 0.5 ? NavCommand::Left : NavCommand::Right;
      b.straight(approach - 15.0, NavCommand::LaneFollow);
      b.straight(15.0, turn);
      spec.stop_line_s = b.length_so_far();
      b.straight(4.0, turn);
      const double radius = rng.uniform(10.0, 15.0);
      b.arc(radius, (turn == NavCommand::Left ? 1.0 : -1.0) * 0.5 * std::numbers::pi, turn);
      b.straight(35.0, NavCommand::LaneFollow);
      spec.route = b.build(speed_limit);
      break;
    }
  }
  return spec;
}

inline void validate(const ScenarioSpec& spec) {
  spec.route.validate();
  if (!(spec.ego_initial_speed >= 0.0)) throw std::invalid_argument("ego_initial_speed: must be >= 0");
  for (std::size_t i = 0; i < spec.actors.size(); ++i) {
    const auto& a = spec.actors[i];
    const std::string where = "actors[" + std::to_string(i) + "].";
    if (!(a.length > 0.0) || !(a.width > 0.0)) throw std::invalid_argument(where + "footprint: dimensions must be > 0");
    if (a.path.size() < 2) throw std::invalid_argument(where + "path: need at least two points");
    if (!(a.initial_speed >= 0.0)) throw std::invalid_argument(where + "initial_speed: must be >= 0");
    if (!(a.trigger_jitter >= 0.0)) throw std::invalid_argument(where + "trigger_jitter: must be >= 0");
    if ((a.script.type == ScriptType::BrakeOnTrigger || a.script.type == ScriptType::StartOnTrigger) &&
        !(a.script.trigger_distance > 0.0))
      throw std::invalid_argument(where + "script.trigger_distance: must be > 0");
  }
  if (spec.stop_line_s && !(*spec.stop_line_s > 0.0 && *spec.stop_line_s < spec.route.length()))
    throw std::invalid_argument("stop_line_s: must lie inside the route");
}

}  // namespace takead::sim

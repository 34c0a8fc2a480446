#pragma once

#include <algorithm>
#include <memory>
#include <vector>

#include "takead/diffnum/random.hpp"
#include "takead/simworld/kinematics.hpp"
#include "takead/simworld/scenario.hpp"

namespace takead::sim {

inline constexpr double kStillSpeed = 0.1;          // m/s
inline constexpr double kOffRoadMargin = 0.5;       // m beyond lane half-width
inline constexpr double kRouteDeviation = 8.0;      // m lateral
inline constexpr double kBlockedTime = 90.0;        // s
inline constexpr double kRouteEndTolerance = 0.5;   // m
inline constexpr double kStopLatchDistance = 2.0;   // m before the line

enum class Termination : int { Running = 0, RouteComplete, RouteDeviation, Timeout, Blocked };

inline std::string_view to_string(Termination t) {
  static constexpr std::array<std::string_view, 5> names{"running", "route_complete", "route_deviation", "timeout",
                                                         "blocked"};
  return names[static_cast<std::size_t>(t)];
}

// Immutable per-episode data shared by world copies.
struct Scenario {
  ScenarioSpec spec;
  std::vector<Polyline> actor_paths;
};

struct World {
  std::shared_ptr<const Scenario> scenario;
  VehicleParams vehicle;
  EgoState ego;
  std::vector<ActorState> actors;
  double time = 0.0;
  std::int64_t tick = 0;
  double progress = 0.0;   // running max of current_s, capped at route length
  double current_s = 0.0;  // arc-length projection of the ego this tick
  double lateral = 0.0;
  bool stop_served = false;
  bool stop_violated = false;
  double still_time = 0.0;
  bool off_road_active = false;
  std::vector<int> contacts;  // actor ids currently overlapping the ego
  std::vector<InfractionEvent> infractions;
  Termination termination = Termination::Running;

  const Route& route() const { return scenario->spec.route; }
  const ScenarioSpec& spec() const { return scenario->spec; }
  const Polyline& actor_path(int id) const { return scenario->actor_paths[static_cast<std::size_t>(id)]; }
  bool done() const { return termination != Termination::Running; }
  double front_s() const { return current_s + 0.5 * vehicle.length; }

  // Stop line that still constrains the ego.
  std::optional<double> active_stop_line() const {
    if (!spec().stop_line_s || stop_served || stop_violated) return std::nullopt;
    return spec().stop_line_s;
  }
};

namespace detail {

inline void place_on_path(ActorState& a, const Polyline& path) {
  const Vec2 p = path.point_at(a.path_s);
  a.x = p.x;
  a.y = p.y;
  a.heading = path.heading_at(a.path_s);
}

}  // namespace detail

inline World reset(const ScenarioSpec& spec, const VehicleParams& vehicle = {}) {
  validate(spec);
  auto sc = std::make_shared<Scenario>();
  sc->spec = spec;
  World w;
  w.vehicle = vehicle;
  const auto& path = spec.route.path;
  w.ego.x = path.points()[0].x;
  w.ego.y = path.points()[0].y;
  w.ego.heading = path.segment_heading(0);
  w.ego.speed = spec.ego_initial_speed;
  for (std::size_t i = 0; i < spec.actors.size(); ++i) {
    const ActorSpec& as = spec.actors[i];
    sc->actor_paths.emplace_back(as.path);
    Rng rng(mix_seed(spec.seed, 1000 + i));
    ActorState a;
    a.id = static_cast<int>(i);
    a.kind = as.kind;
    a.length = as.length;
    a.width = as.width;
    a.script = as.script;
    a.script.trigger_distance += as.trigger_jitter > 0.0 ? rng.uniform(-as.trigger_jitter, as.trigger_jitter) : 0.0;
    a.path_s = as.start_s;
    switch (as.script.type) {
      case ScriptType::Static: a.phase = ScriptPhase::Idle; a.speed = 0.0; break;
      case ScriptType::Cruise:
      case ScriptType::BrakeOnTrigger: a.phase = ScriptPhase::Cruising; a.speed = as.initial_speed; break;
      case ScriptType::StartOnTrigger: a.phase = ScriptPhase::Idle; a.speed = as.initial_speed; break;
    }
    detail::place_on_path(a, sc->actor_paths.back());
    w.actors.push_back(a);
  }
  w.scenario = std::move(sc);
  return w;
}

// One tick of an actor's behavior script.
inline void step_actor(ActorState& a, const Polyline& path, Vec2 ego_pos, double dt = kDt) {
  const bool in_range = (ego_pos - a.position()).norm() < a.script.trigger_distance;
  switch (a.phase) {
    case ScriptPhase::Idle:
      if (a.script.type == ScriptType::StartOnTrigger && in_range) a.phase = ScriptPhase::Resuming;
      break;
    case ScriptPhase::Cruising:
      if (a.script.type == ScriptType::BrakeOnTrigger && in_range) a.phase = ScriptPhase::Braking;
      break;
    default: break;
  }
  switch (a.phase) {
    case ScriptPhase::Braking:
      a.speed -= a.script.decel * dt;
      if (a.speed <= 0.0) {
        a.speed = 0.0;
        a.phase = ScriptPhase::Holding;
        a.phase_time = 0.0;
      }
      break;
    case ScriptPhase::Holding:
      a.phase_time += dt;
      if (a.phase_time >= a.script.hold_time) a.phase = ScriptPhase::Resuming;
      break;
    case ScriptPhase::Resuming:
      a.speed = std::min(a.script.cruise_speed, a.speed + a.script.accel * dt);
      if (a.speed >= a.script.cruise_speed) a.phase = ScriptPhase::Finished;
      break;
    default: break;
  }
  a.path_s += a.speed * dt;
  if (a.script.type == ScriptType::StartOnTrigger && a.kind == ActorKind::Pedestrian && a.path_s >= path.length()) {
    a.path_s = path.length();
    a.speed = 0.0;
    a.phase = ScriptPhase::Finished;
    a.script.cruise_speed = 0.0;
  }
  detail::place_on_path(a, path);
}

inline InfractionKind collision_kind(ActorKind k) {
  switch (k) {
    case ActorKind::Vehicle: return InfractionKind::CollisionVehicle;
    case ActorKind::Pedestrian: return InfractionKind::CollisionPedestrian;
    case ActorKind::Static: return InfractionKind::CollisionStatic;
  }
  return InfractionKind::CollisionVehicle;
}

// Reports each ego/actor contact once, when it begins; the pair is re-armed
// only after the boxes separate.
inline std::vector<InfractionEvent> detect_collisions(World& w) {
  std::vector<InfractionEvent> events;
  const OrientedBox eb = ego_box(w.ego, w.vehicle);
  std::vector<int> now;
  for (const auto& a : w.actors) {
    if (!boxes_overlap(eb, a.box())) continue;
    now.push_back(a.id);
    if (std::find(w.contacts.begin(), w.contacts.end(), a.id) == w.contacts.end()) {
      const auto kind = collision_kind(a.kind);
      events.push_back({kind, w.time, penalty_factor(kind), a.id});
    }
  }
  w.contacts = std::move(now);
  return events;
}

inline std::vector<InfractionEvent> advance_world(World& w, const ControlCommand& raw_cmd) {
  std::vector<InfractionEvent> events;
  if (w.done()) return events;
  const ControlCommand cmd = raw_cmd.clamped();
  w.ego = step_kinematics(w.ego, cmd, kDt, w.vehicle);
  for (auto& a : w.actors) step_actor(a, w.actor_path(a.id), w.ego.position());
  w.time = static_cast<double>(++w.tick) * kDt;

  const Route& route = w.route();
  const Projection pr = route.path.project(w.ego.position(), std::max(0.0, w.progress - 5.0), w.progress + 15.0);
  w.current_s = pr.s;
  w.lateral = pr.lateral;
  w.progress = std::max(w.progress, std::min(pr.s, route.length()));

  auto log = [&](InfractionKind k, int actor = -1) {
    events.push_back({k, w.time, penalty_factor(k), actor});
  };

  if (auto line = w.active_stop_line()) {
    const double to_line = *line - w.front_s();
    if (w.ego.speed < kStillSpeed && to_line >= 0.0 && to_line <= kStopLatchDistance) {
      w.stop_served = true;
    } else if (to_line < 0.0) {
      if (w.ego.speed > kStillSpeed) {
        w.stop_violated = true;
        log(InfractionKind::StopSignViolation);
      } else {
        w.stop_served = true;
      }
    }
  }

  for (auto& e : detect_collisions(w)) events.push_back(e);

  const bool off = std::abs(pr.lateral) > route.lane_half_width + kOffRoadMargin;
  if (off && !w.off_road_active) log(InfractionKind::OffRoad);
  w.off_road_active = off;

  w.still_time = w.ego.speed < kStillSpeed ? w.still_time + kDt : 0.0;

  if (std::abs(pr.lateral) > kRouteDeviation) {
    log(InfractionKind::RouteDeviation);
    w.termination = Termination::RouteDeviation;
  } else if (w.progress >= route.length() - kRouteEndTolerance) {
    w.progress = route.length();
    w.termination = Termination::RouteComplete;
  } else if (w.time >= route.time_budget - 1e-9) {
    log(InfractionKind::Timeout);
    w.termination = Termination::Timeout;
  } else if (w.still_time >= kBlockedTime - 1e-9) {
    log(InfractionKind::Blocked);
    w.termination = Termination::Blocked;
  }

  for (const auto& e : events) w.infractions.push_back(e);
  return events;
}

inline double route_completion(const World& w) { return std::clamp(w.progress / w.route().length(), 0.0, 1.0); }

inline double infraction_score(const std::vector<InfractionEvent>& events) {
  double s = 1.0;
  for (const auto& e : events) s *= e.penalty;
  return s;
}

}  // namespace takead::sim

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "takead/simworld/geometry.hpp"

namespace takead::sim {

inline constexpr double kDt = 0.05;

struct VehicleParams {
  double max_steer_angle = 0.5236;  // rad
  double max_accel = 3.0;           // m/s^2 at full throttle
  double max_brake = 8.0;           // m/s^2 at full brake
  double drag = 0.002;              // 1/m, deceleration = drag * v^2
  double length = 4.6;
  double width = 2.0;
};

struct EgoState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double wheelbase = 2.9;

  Vec2 position() const { return {x, y}; }
  bool operator==(const EgoState&) const = default;
};

struct ControlCommand {
  double throttle = 0.0;
  double brake = 0.0;
  double steer = 0.0;

  bool in_range() const {
    return throttle >= 0.0 && throttle <= 1.0 && brake >= 0.0 && brake <= 1.0 && steer >= -1.0 && steer <= 1.0;
  }
  ControlCommand clamped() const {
    auto c01 = [](double v) { return std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0; };
    return {c01(throttle), c01(brake), std::isfinite(steer) ? std::clamp(steer, -1.0, 1.0) : 0.0};
  }
  bool operator==(const ControlCommand&) const = default;
};

enum class NavCommand : int { Straight = 0, Left, Right, LaneFollow, ChangeLaneLeft, ChangeLaneRight, Void };
inline constexpr std::size_t kNavCommandCount = 7;

inline constexpr std::array<std::string_view, kNavCommandCount> kNavCommandNames{
    "Straight", "Left", "Right", "LaneFollow", "ChangeLaneLeft", "ChangeLaneRight", "Void"};

inline std::string_view to_string(NavCommand c) { return kNavCommandNames[static_cast<std::size_t>(c)]; }

inline NavCommand nav_command_from(std::string_view s) {
  for (std::size_t i = 0; i < kNavCommandCount; ++i)
    if (kNavCommandNames[i] == s) return static_cast<NavCommand>(i);
  throw std::invalid_argument("unknown navigation command '" + std::string(s) + "'");
}

inline std::array<double, kNavCommandCount> one_hot(NavCommand c) {
  std::array<double, kNavCommandCount> v{};
  v[static_cast<std::size_t>(c)] = 1.0;
  return v;
}

enum class ActorKind : int { Vehicle = 0, Pedestrian, Static };
inline constexpr std::array<std::string_view, 3> kActorKindNames{"vehicle", "pedestrian", "static"};
inline std::string_view to_string(ActorKind k) { return kActorKindNames[static_cast<std::size_t>(k)]; }
inline ActorKind actor_kind_from(std::string_view s) {
  for (std::size_t i = 0; i < kActorKindNames.size(); ++i)
    if (kActorKindNames[i] == s) return static_cast<ActorKind>(i);
  throw std::invalid_argument("unknown actor kind '" + std::string(s) + "'");
}

enum class ScriptType : int { Static = 0, Cruise, BrakeOnTrigger, StartOnTrigger };
inline constexpr std::array<std::string_view, 4> kScriptNames{"static", "cruise", "brake_on_trigger",
                                                              "start_on_trigger"};
inline std::string_view to_string(ScriptType k) { return kScriptNames[static_cast<std::size_t>(k)]; }
inline ScriptType script_type_from(std::string_view s) {
  for (std::size_t i = 0; i < kScriptNames.size(); ++i)
    if (kScriptNames[i] == s) return static_cast<ScriptType>(i);
  throw std::invalid_argument("unknown actor script '" + std::string(s) + "'");
}

// Script parameters. Triggers fire when the ego center comes within
// trigger_distance of the actor center.
struct ActorScript {
  ScriptType type = ScriptType::Static;
  double cruise_speed = 0.0;
  double trigger_distance = 0.0;
  double decel = 6.0;
  double accel = 2.0;
  double hold_time = 3.0;

  bool operator==(const ActorScript&) const = default;
};

enum class ScriptPhase : int { Idle = 0, Cruising, Braking, Holding, Resuming, Finished };

struct ActorState {
  int id = 0;
  ActorKind kind = ActorKind::Vehicle;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double length = 4.6;
  double width = 2.0;
  ActorScript script;
  ScriptPhase phase = ScriptPhase::Idle;
  double phase_time = 0.0;
  double path_s = 0.0;

  Vec2 position() const { return {x, y}; }
  Vec2 velocity() const { return unit(heading) * speed; }
  OrientedBox box() const { return {{x, y}, heading, length, width}; }
  bool operator==(const ActorState&) const = default;
};

enum class InfractionKind : int {
  CollisionVehicle = 0,
  CollisionStatic,
  CollisionPedestrian,
  OffRoad,
  StopSignViolation,
  RouteDeviation,
  Timeout,
  Blocked
};

inline constexpr std::array<std::string_view, 8> kInfractionNames{
    "collision_vehicle", "collision_static",   "collision_pedestrian", "off_road",
    "stop_sign_violation", "route_deviation", "timeout",              "blocked"};

inline std::string_view to_string(InfractionKind k) { return kInfractionNames[static_cast<std::size_t>(k)]; }
inline InfractionKind infraction_kind_from(std::string_view s) {
  for (std::size_t i = 0; i < kInfractionNames.size(); ++i)
    if (kInfractionNames[i] == s) return static_cast<InfractionKind>(i);
  throw std::invalid_argument("unknown infraction kind '" + std::string(s) + "'");
}

// Leaderboard-style multiplicative penalties. Terminal events carry 1.0 and
// act through route completion instead.
inline double penalty_factor(InfractionKind k) {
  switch (k) {
    case InfractionKind::CollisionVehicle: return 0.60;
    case InfractionKind::CollisionPedestrian: return 0.50;
    case InfractionKind::CollisionStatic: return 0.65;
    case InfractionKind::StopSignViolation: return 0.80;
    case InfractionKind::OffRoad: return 0.70;
    case InfractionKind::RouteDeviation:
    case InfractionKind::Timeout:
    case InfractionKind::Blocked: return 1.0;
  }
  return 1.0;
}

inline bool is_terminal(InfractionKind k) {
  return k == InfractionKind::RouteDeviation || k == InfractionKind::Timeout || k == InfractionKind::Blocked;
}

inline bool is_collision(InfractionKind k) {
  return k == InfractionKind::CollisionVehicle || k == InfractionKind::CollisionStatic ||
         k == InfractionKind::CollisionPedestrian;
}

struct InfractionEvent {
  InfractionKind kind = InfractionKind::CollisionVehicle;
  double time = 0.0;
  double penalty = 1.0;
  int actor_id = -1;
  bool operator==(const InfractionEvent&) const = default;
};

}  // namespace takead::sim

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "takead/policy/control_vocabulary.hpp"
#include "takead/simworld/world.hpp"

namespace takead::expert {

using sim::ActorState;
using sim::ControlCommand;
using sim::EgoState;
using sim::Route;
using sim::Vec2;
using sim::VehicleParams;

struct ExpertConfig {
  double v0 = 9.0;             // desired speed, capped by the route limit
  double headway = 1.5;        // T
  double min_gap = 2.0;        // s0
  double max_accel = 2.0;      // a
  double comfort_decel = 3.0;  // b
  double exponent = 4.0;       // delta
  double lookahead_base = 3.0;
  double lookahead_gain = 0.5;  // s
  double forecast_horizon = 2.0;
  double lateral_accel = 2.0;    // curve speed limit
  double scan_range = 60.0;      // m ahead searched for obstacles
  double predict_horizon = 3.0;  // s, crossing-actor prediction
  double corridor_margin = 0.4;  // m

  void validate() const {
    const double all[] = {v0, headway, min_gap, max_accel, comfort_decel, exponent, lookahead_base,
                          forecast_horizon, lateral_accel, scan_range, predict_horizon};
    for (double x : all)
      if (!(x > 0.0)) throw std::invalid_argument("expert: all parameters must be > 0");
    if (!(lookahead_gain >= 0.0) || !(corridor_margin >= 0.0))
      throw std::invalid_argument("expert: lookahead_gain and corridor_margin must be >= 0");
  }
};

inline constexpr std::size_t kPlanWaypoints = 6;
inline constexpr double kPlanSpacing = 0.5;  // s
using Trajectory = std::array<Vec2, kPlanWaypoints>;

struct ExpertLabel {
  Trajectory trajectory{};
  ControlCommand command;
  policy::ControlIndices indices;
};

// What the expert needs from the world; lets the planner roll out a private
// copy without touching the episode.
struct ExpertView {
  const Route* route = nullptr;
  VehicleParams vehicle;
  EgoState ego;
  double current_s = 0.0;
  std::span<const ActorState> actors;
  std::optional<double> stop_line;  // unserved stop line, if any
};

inline ExpertView view_of(const sim::World& w) {
  return {&w.route(), w.vehicle, w.ego, w.current_s, w.actors, w.active_stop_line()};
}

// Closed-form IDM acceleration. With no leader only the free-road term applies.
inline double idm_acceleration(const ExpertConfig& c, double v, double v0, std::optional<double> gap = std::nullopt,
                               double lead_speed = 0.0) {
  double acc = c.max_accel * (1.0 - std::pow(v / v0, c.exponent));
  if (gap) {
    const double dv = v - lead_speed;
    const double s_star = c.min_gap + std::max(0.0, v * c.headway + v * dv / (2.0 * std::sqrt(c.max_accel * c.comfort_decel)));
    const double s = std::max(*gap, 0.1);
    acc -= c.max_accel * (s_star / s) * (s_star / s);
  }
  return acc;
}

// Maps a desired acceleration to pedals, compensating drag.
inline ControlCommand accel_to_command(double accel, double speed, const VehicleParams& vp) {
  const double required = accel + vp.drag * speed * speed;
  ControlCommand c;
  if (required >= 0.0) {
    c.throttle = std::min(1.0, required / vp.max_accel);
  } else {
    c.brake = std::min(1.0, -required / vp.max_brake);
  }
  return c;
}

struct Obstacle {
  double gap = 0.0;  // ego front bumper to obstacle rear, along the route
  double speed = 0.0;
};

namespace detail {

inline void extents(const ActorState& a, double route_heading, double& half_long, double& half_lat) {
  const double dh = sim::normalize_angle(a.heading - route_heading);
  const double c = std::abs(std::cos(dh)), s = std::abs(std::sin(dh));
  half_long = 0.5 * (a.length * c + a.width * s);
  half_lat = 0.5 * (a.length * s + a.width * c);
}

}  // namespace detail

// Nearest obstacle in the ego corridor: actors on the route ahead, actors
// predicted (constant velocity) to enter it, and an unserved stop line.
inline std::optional<Obstacle> leading_obstacle(const ExpertView& v, const ExpertConfig& c) {
  const Route& r = *v.route;
  const double front = v.current_s + 0.5 * v.vehicle.length;
  const double lo = std::max(0.0, v.current_s - 10.0), hi = v.current_s + c.scan_range + 20.0;
  std::optional<Obstacle> best;
  auto consider = [&](double gap, double speed) {
    if (gap > c.scan_range) return;
    if (!best || gap < best->gap) best = Obstacle{gap, speed};
  };
  for (const auto& a : v.actors) {
    const Vec2 p = a.position();
    const auto pr = r.path.project(p, lo, hi);
    const double rh = r.path.heading_at(pr.s);
    double half_long, half_lat;
    detail::extents(a, rh, half_long, half_lat);
    const double corridor = 0.5 * v.vehicle.width + half_lat + c.corridor_margin;
    const Vec2 vel = a.velocity();
    const double along = std::max(0.0, vel.dot(sim::unit(rh)));
    if (std::abs(pr.lateral) < corridor && pr.s > v.current_s) {
      consider(pr.s - half_long - front, along);
      continue;
    }
    if (a.speed < 0.2) continue;
    for (double t = 0.25; t <= c.predict_horizon + 1e-9; t += 0.25) {
      const Vec2 q = p + vel * t;
      const auto pq = r.path.project(q, lo, hi);
      if (std::abs(pq.lateral) < corridor && pq.s > v.current_s) {
        consider(pq.s - half_long - front, along);
        break;
      }
    }
  }
  if (v.stop_line) consider(*v.stop_line + c.min_gap - 1.0 - front, 0.0);
  if (best) best->gap = std::max(best->gap, 0.1);
  return best;
}

// Desired speed: config, route limit, and the upcoming curvature.
inline double target_speed(const ExpertView& v, const ExpertConfig& c) {
  const Route& r = *v.route;
  double v0 = std::min(c.v0, r.speed_limit);
  for (double d = 0.0; d <= 30.0; d += 1.0) {
    const double k = std::abs(r.path.curvature_at(v.current_s + d));
    if (k < 1e-6) continue;
    const double vc2 = c.lateral_accel / k;
    v0 = std::min(v0, std::sqrt(vc2 + 2.0 * c.comfort_decel * d));
  }
  return std::max(v0, 0.5);
}

inline double pure_pursuit_steer(const Route& r, const EgoState& ego, double current_s, double lookahead,
                                 const VehicleParams& vp) {
  const Vec2 target = r.path.point_at(current_s + lookahead);
  const Vec2 l = sim::to_local(target, ego.position(), ego.heading);
  const double d = std::max(l.norm(), 1e-3);
  const double alpha = std::atan2(l.y, l.x);
  const double delta = std::atan(2.0 * ego.wheelbase * std::sin(alpha) / d);
  return std::clamp(delta / vp.max_steer_angle, -1.0, 1.0);
}

inline ControlCommand expert_control(const ExpertView& v, const ExpertConfig& c = {}) {
  if (v.route == nullptr || v.route->path.segment_count() == 0) throw std::invalid_argument("expert: no route");
  const double v0 = target_speed(v, c);
  const auto obs = leading_obstacle(v, c);
  double acc = obs ? idm_acceleration(c, v.ego.speed, v0, obs->gap, obs->speed) : idm_acceleration(c, v.ego.speed, v0);
  acc = std::clamp(acc, -v.vehicle.max_brake, c.max_accel);
  ControlCommand cmd = accel_to_command(acc, v.ego.speed, v.vehicle);
  const double ld = c.lookahead_base + c.lookahead_gain * v.ego.speed;
  cmd.steer = pure_pursuit_steer(*v.route, v.ego, v.current_s, ld, v.vehicle);
  return cmd;
}

inline ControlCommand expert_control(const sim::World& w, const ExpertConfig& c = {}) {
  return expert_control(view_of(w), c);
}

inline policy::ControlIndices discretize_control(const ControlCommand& cmd, const policy::ControlVocabulary& vocab) {
  return {policy::nearest_index(vocab.throttle, cmd.throttle), policy::nearest_index(vocab.brake, cmd.brake),
          policy::nearest_index(vocab.steer, cmd.steer)};
}

// 3 s rollout of the expert with actors held at constant velocity, sampled
// every 0.5 s in the initial ego frame.
inline Trajectory plan_trajectory(const ExpertView& start, const ExpertConfig& c = {}) {
  const Route& r = *start.route;
  std::vector<ActorState> actors(start.actors.begin(), start.actors.end());
  ExpertView v = start;
  const int per_point = static_cast<int>(std::lround(kPlanSpacing / sim::kDt));
  Trajectory out{};
  for (std::size_t k = 0; k < kPlanWaypoints; ++k) {
    for (int i = 0; i < per_point; ++i) {
      v.actors = actors;
      const ControlCommand cmd = expert_control(v, c);
      v.ego = sim::step_kinematics(v.ego, cmd, sim::kDt, v.vehicle);
      for (auto& a : actors) {
        a.x += a.speed * std::cos(a.heading) * sim::kDt;
        a.y += a.speed * std::sin(a.heading) * sim::kDt;
      }
      v.current_s = r.path.project(v.ego.position(), std::max(0.0, v.current_s - 5.0), v.current_s + 15.0).s;
      if (v.stop_line) {
        const double to_line = *v.stop_line - (v.current_s + 0.5 * v.vehicle.length);
        if (v.ego.speed < sim::kStillSpeed && to_line <= sim::kStopLatchDistance) v.stop_line.reset();
      }
    }
    out[k] = sim::to_local(v.ego.position(), start.ego.position(), start.ego.heading);
  }
  return out;
}

inline ExpertLabel expert_act(const sim::World& w, const ExpertConfig& c = {},
                              const policy::ControlVocabulary& vocab = {}) {
  const ExpertView v = view_of(w);
  ExpertLabel label;
  label.command = expert_control(v, c);
  label.indices = discretize_control(label.command, vocab);
  label.trajectory = plan_trajectory(v, c);
  return label;
}

// Straight constant-speed ego against constant-velocity actors; earliest
// overlapping step within the horizon.
inline std::optional<double> forecast_collision(const sim::World& w, double horizon) {
  const int steps = static_cast<int>(std::floor(horizon / sim::kDt + 1e-9));
  const Vec2 ev = sim::unit(w.ego.heading) * w.ego.speed;
  for (int k = 0; k <= steps; ++k) {
    const double t = k * sim::kDt;
    const sim::OrientedBox eb{w.ego.position() + ev * t, w.ego.heading, w.vehicle.length, w.vehicle.width};
    for (const auto& a : w.actors) {
      const sim::OrientedBox ab{a.position() + a.velocity() * t, a.heading, a.length, a.width};
      if (sim::boxes_overlap(eb, ab)) return t;
    }
  }
  return std::nullopt;
}

}  // namespace takead::expert

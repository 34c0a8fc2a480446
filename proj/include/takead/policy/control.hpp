#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "takead/expert/expert.hpp"

namespace takead::policy {

using sim::ControlCommand;

struct PidConfig {
  double kp = 0.5;
  double ki = 0.05;
  double integral_limit = 10.0;  // |ki * integral| <= 0.5
  double lookahead = 4.0;        // m
  double degenerate_length = 0.1;  // m of total path below which the plan means "stop"
};

// Converts a planned trajectory (ego frame) into pedals and steering:
// pure pursuit laterally, PI on speed longitudinally.
class PidTracker {
 public:
  explicit PidTracker(PidConfig cfg = {}) : cfg_(cfg) {}

  ControlCommand track(const expert::Trajectory& plan, const sim::EgoState& ego,
                       const sim::VehicleParams& vp = {}) {
    double path = 0.0;
    sim::Vec2 prev{0.0, 0.0};
    for (const auto& w : plan) {
      path += (w - prev).norm();
      prev = w;
    }
    if (path < cfg_.degenerate_length) {
      integral_ = 0.0;
      return {0.0, 1.0, 0.0};
    }
    const double target = path / static_cast<double>(plan.size()) / expert::kPlanSpacing;
    const double err = target - ego.speed;
    integral_ = std::clamp(integral_ + err * sim::kDt, -cfg_.integral_limit, cfg_.integral_limit);
    const double u = cfg_.kp * err + cfg_.ki * integral_;
    ControlCommand c;
    if (u >= 0.0) {
      c.throttle = std::min(1.0, u);
    } else {
      c.brake = std::min(1.0, -u);
    }

    std::size_t pick = 0;
    double best = std::abs(plan[0].norm() - cfg_.lookahead);
    for (std::size_t i = 1; i < plan.size(); ++i) {
      const double d = std::abs(plan[i].norm() - cfg_.lookahead);
      if (d < best) {
        best = d;
        pick = i;
      }
    }
    const sim::Vec2 tgt = plan[pick];
    const double dist = tgt.norm();
    if (dist > 1e-6 && tgt.x > 0.0) {
      const double alpha = std::atan2(tgt.y, tgt.x);
      const double delta = std::atan(2.0 * ego.wheelbase * std::sin(alpha) / dist);
      c.steer = std::clamp(delta / vp.max_steer_angle, -1.0, 1.0);
    }
    return c;
  }

  void reset() { integral_ = 0.0; }
  double integral() const { return integral_; }

 private:
  PidConfig cfg_;
  double integral_ = 0.0;
};

// Mean throttle, mean steer, max brake. Throttle is kept as the mean; the
// vehicle ignores it whenever brake > 0.
inline ControlCommand ensemble(const ControlCommand& ctrl, const ControlCommand& traj) {
  return {0.5 * (ctrl.throttle + traj.throttle), std::max(ctrl.brake, traj.brake), 0.5 * (ctrl.steer + traj.steer)};
}

struct CreepConfig {
  bool enabled = true;
  double still_time = 2.5;    // s
  double throttle = 0.7;
  int duration_ticks = 20;    // 1 s
  double clear_distance = 20.0;  // m
};

// Throttle pulse after standing still with a clear road ahead.
class SafetyCreep {
 public:
  explicit SafetyCreep(CreepConfig cfg = {}) : cfg_(cfg) {}

  // Returns the override for this tick, if any. `policy_cmd` supplies steer.
  std::optional<ControlCommand> update(const sim::World& w, const ControlCommand& policy_cmd) {
    if (!cfg_.enabled) return std::nullopt;
    if (active_ > 0) {
      --active_;
      return ControlCommand{cfg_.throttle, 0.0, policy_cmd.steer};
    }
    still_ = w.ego.speed < sim::kStillSpeed ? still_ + sim::kDt : 0.0;
    if (still_ >= cfg_.still_time - 1e-9 && road_clear(w)) {
      still_ = 0.0;
      active_ = cfg_.duration_ticks - 1;
      return ControlCommand{cfg_.throttle, 0.0, policy_cmd.steer};
    }
    return std::nullopt;
  }

  bool road_clear(const sim::World& w) const {
    const double half = w.route().lane_half_width;
    for (const auto& a : w.actors) {
      const sim::Vec2 l = sim::to_local(a.position(), w.ego.position(), w.ego.heading);
      const double reach = 0.5 * std::max(a.length, a.width);
      if (l.x <= 0.0 || std::abs(l.y) > half + reach) continue;
      if (l.x - 0.5 * w.vehicle.length - reach <= cfg_.clear_distance) return false;
    }
    return true;
  }

  bool active() const { return active_ > 0; }
  void reset() { still_ = 0.0, active_ = 0; }

 private:
  CreepConfig cfg_;
  double still_ = 0.0;
  int active_ = 0;
};

}  // namespace takead::policy

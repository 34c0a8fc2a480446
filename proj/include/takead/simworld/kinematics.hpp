#pragma once

#include <algorithm>
#include <cmath>

#include "takead/simworld/types.hpp"

namespace takead::sim {

// Kinematic bicycle model, integrated with one RK4 step of length dt under a
// constant command. Brake overrides throttle. Speed never goes negative.
inline EgoState step_kinematics(const EgoState& ego, const ControlCommand& cmd, double dt = kDt,
                                const VehicleParams& vp = {}) {
  const double throttle = cmd.brake > 0.0 ? 0.0 : cmd.throttle;
  const double yaw_gain = std::tan(vp.max_steer_angle * cmd.steer) / ego.wheelbase;
  const double push = vp.max_accel * throttle - vp.max_brake * cmd.brake;

  // Comes to rest inside this tick: uniform deceleration to standstill.
  if (push < 0.0 && ego.speed <= -push * dt) {
    const double t_stop = ego.speed / -push;
    const double dist = 0.5 * ego.speed * t_stop;
    const double mid_heading = ego.heading + 0.5 * yaw_gain * dist;
    EgoState out = ego;
    out.x += dist * std::cos(mid_heading);
    out.y += dist * std::sin(mid_heading);
    out.heading = normalize_angle(ego.heading + yaw_gain * dist);
    out.speed = 0.0;
    return out;
  }

  struct D { double x, y, h, v; };
  auto deriv = [&](double h, double v) -> D {
    v = std::max(v, 0.0);
    double a = push - vp.drag * v * v;
    if (v <= 0.0 && a < 0.0) a = 0.0;
    return {v * std::cos(h), v * std::sin(h), v * yaw_gain, a};
  };

  const D k1 = deriv(ego.heading, ego.speed);
  const D k2 = deriv(ego.heading + 0.5 * dt * k1.h, ego.speed + 0.5 * dt * k1.v);
  const D k3 = deriv(ego.heading + 0.5 * dt * k2.h, ego.speed + 0.5 * dt * k2.v);
  const D k4 = deriv(ego.heading + dt * k3.h, ego.speed + dt * k3.v);

  EgoState out = ego;
  out.x += (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x) * dt / 6.0;
  out.y += (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y) * dt / 6.0;
  out.heading = normalize_angle(ego.heading + (k1.h + 2.0 * k2.h + 2.0 * k3.h + k4.h) * dt / 6.0);
  out.speed = std::max(0.0, ego.speed + (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v) * dt / 6.0);
  return out;
}

inline OrientedBox ego_box(const EgoState& ego, const VehicleParams& vp = {}) {
  return {{ego.x, ego.y}, ego.heading, vp.length, vp.width};
}

}  // namespace takead::sim

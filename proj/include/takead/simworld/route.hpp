#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "takead/simworld/geometry.hpp"
#include "takead/simworld/types.hpp"

namespace takead::sim {

struct Route {
  Polyline path;
  std::vector<NavCommand> commands;  // one per segment
  double lane_half_width = 1.75;
  double speed_limit = 8.0;
  double time_budget = 0.0;  // seconds

  double length() const { return path.length(); }
  NavCommand command_at(double s) const { return commands[path.segment_at(s)]; }

  void validate() const {
    if (path.segment_count() == 0) throw std::invalid_argument("route.waypoints: need at least two waypoints");
    if (commands.size() != path.segment_count())
      throw std::invalid_argument("route.commands: " + std::to_string(commands.size()) + " commands for " +
                                  std::to_string(path.segment_count()) + " segments");
    if (!(lane_half_width > 0.0)) throw std::invalid_argument("route.lane_half_width: must be > 0");
    if (!(speed_limit > 0.0)) throw std::invalid_argument("route.speed_limit: must be > 0");
    if (!(time_budget > 0.0)) throw std::invalid_argument("route.time_budget: must be > 0");
  }
};

// Time budget: route length at 2 m/s plus 30 s.
inline double default_time_budget(double length) { return length / 2.0 + 30.0; }

inline Route make_route(std::vector<Vec2> waypoints, std::vector<NavCommand> commands, double speed_limit,
                        double lane_half_width = 1.75) {
  Route r;
  r.path = Polyline(std::move(waypoints));
  r.commands = std::move(commands);
  r.speed_limit = speed_limit;
  r.lane_half_width = lane_half_width;
  r.time_budget = default_time_budget(r.path.length());
  r.validate();
  return r;
}

// Builds dense (about 1 m) route polylines from straight, arc and lane-shift
// pieces, tagging each segment with a navigation command.
class RouteBuilder {
 public:
  explicit RouteBuilder(Vec2 start = {0.0, 0.0}, double heading = 0.0) : pos_(start), heading_(heading) {
    pts_.push_back(start);
  }

  RouteBuilder& straight(double len, NavCommand cmd) {
    const int n = std::max(1, static_cast<int>(std::ceil(len)));
    const Vec2 base = pos_;
    for (int i = 1; i <= n; ++i) push(base + unit(heading_) * (len * i / n), cmd);
    return *this;
  }

  // Positive angle turns left.
  RouteBuilder& arc(double radius, double angle, NavCommand cmd) {
    const double len = radius * std::abs(angle);
    const int n = std::max(2, static_cast<int>(std::ceil(len)));
    const double side = angle > 0 ? 1.0 : -1.0;
    const Vec2 center = pos_ + unit(heading_ + side * 0.5 * std::numbers::pi) * radius;
    const double start_ang = heading_ - side * 0.5 * std::numbers::pi;
    for (int i = 1; i <= n; ++i) {
      const double a = start_ang + angle * i / n;
      push(center + unit(a) * radius, cmd);
    }
    heading_ = normalize_angle(heading_ + angle);
    return *this;
  }

  // Smooth lateral displacement (positive = left) over `len` meters.
  RouteBuilder& shift(double len, double offset, NavCommand cmd) {
    const int n = std::max(2, static_cast<int>(std::ceil(len)));
    const Vec2 base = pos_;
    const Vec2 fwd = unit(heading_), left = unit(heading_ + 0.5 * std::numbers::pi);
    for (int i = 1; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      const double lat = offset * 0.5 * (1.0 - std::cos(std::numbers::pi * t));
      push(base + fwd * (len * t) + left * lat, cmd);
    }
    return *this;
  }

  double length_so_far() const {
    double s = 0.0;
    for (std::size_t i = 1; i < pts_.size(); ++i) s += (pts_[i] - pts_[i - 1]).norm();
    return s;
  }
  Vec2 position() const { return pos_; }
  double heading() const { return heading_; }

  Route build(double speed_limit, double lane_half_width = 1.75) const {
    return make_route(pts_, cmds_, speed_limit, lane_half_width);
  }

 private:
  void push(Vec2 p, NavCommand cmd) {
    pts_.push_back(p);
    cmds_.push_back(cmd);
    pos_ = p;
  }

  Vec2 pos_;
  double heading_;
  std::vector<Vec2> pts_;
  std::vector<NavCommand> cmds_;
};

}  // namespace takead::sim

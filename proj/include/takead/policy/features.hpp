#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "takead/simworld/world.hpp"

namespace takead::policy {

inline constexpr std::size_t kAgentFeatures = 14;
inline constexpr std::size_t kMapFeatures = 14;
using AgentRow = std::array<double, kAgentFeatures>;
using MapRow = std::array<double, kMapFeatures>;

enum class TokenKind : int { Vehicle = 0, Pedestrian, Static, StopLine };

struct SceneConfig {
  std::size_t max_agents = 8;   // N_a
  std::size_t map_tokens = 16;  // N_m
  double map_spacing = 3.0;     // m per route segment token
  double agent_radius = 50.0;   // m
  double command_lookahead = 5.0;

  bool operator==(const SceneConfig&) const = default;
};

// Raw privileged inputs for one frame, everything in the ego frame. Agent
// rows are ordered by distance; the map rows cover the upcoming route.
struct SceneFeatures {
  std::vector<AgentRow> agents;
  std::vector<MapRow> map;
  sim::NavCommand command = sim::NavCommand::LaneFollow;
  double ego_speed = 0.0;

  bool operator==(const SceneFeatures&) const = default;
};

inline AgentRow agent_row(sim::Vec2 local, double rel_heading, sim::Vec2 local_vel, double length, double width,
                          TokenKind kind, double ego_speed) {
  AgentRow r{};
  r[0] = local.x / 20.0;
  r[1] = local.y / 20.0;
  r[2] = std::cos(rel_heading);
  r[3] = std::sin(rel_heading);
  r[4] = local_vel.x / 10.0;
  r[5] = local_vel.y / 10.0;
  r[6] = length / 5.0;
  r[7] = width / 5.0;
  r[8 + static_cast<int>(kind)] = 1.0;
  r[12] = local.norm() / 50.0;
  r[13] = ego_speed / 10.0;
  return r;
}

inline SceneFeatures extract_features(const sim::World& w, const SceneConfig& cfg = {}) {
  SceneFeatures f;
  const sim::EgoState& e = w.ego;
  const sim::Vec2 ep = e.position();
  const sim::Route& r = w.route();
  f.ego_speed = e.speed;
  f.command = r.command_at(std::min(w.current_s + cfg.command_lookahead, r.length()));

  struct Cand {
    double dist;
    int order;
    AgentRow row;
  };
  std::vector<Cand> cands;
  const double c = std::cos(e.heading), s = std::sin(e.heading);
  for (const auto& a : w.actors) {
    const sim::Vec2 l = sim::to_local(a.position(), ep, e.heading);
    const double d = l.norm();
    if (d > cfg.agent_radius) continue;
    const sim::Vec2 v = a.velocity();
    const sim::Vec2 lv{c * v.x + s * v.y, -s * v.x + c * v.y};
    cands.push_back({d, a.id, agent_row(l, sim::normalize_angle(a.heading - e.heading), lv, a.length, a.width,
                                        static_cast<TokenKind>(static_cast<int>(a.kind)), e.speed)});
  }
  if (auto line = w.active_stop_line()) {
    const sim::Vec2 p = r.path.point_at(*line);
    const sim::Vec2 l = sim::to_local(p, ep, e.heading);
    if (l.norm() <= cfg.agent_radius)
      cands.push_back({l.norm(), 1 << 20,
                       agent_row(l, sim::normalize_angle(r.path.heading_at(*line) - e.heading), {}, 0.3,
                                 2.0 * r.lane_half_width, TokenKind::StopLine, e.speed)});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.order < b.order;
  });
  for (std::size_t i = 0; i < cands.size() && i < cfg.max_agents; ++i) f.agents.push_back(cands[i].row);

  const double start = w.current_s - cfg.map_spacing;
  for (std::size_t j = 0; j < cfg.map_tokens; ++j) {
    const double s0 = start + cfg.map_spacing * static_cast<double>(j);
    const double mid = s0 + 0.5 * cfg.map_spacing;
    const sim::Vec2 a = r.path.point_at(s0), b = r.path.point_at(s0 + cfg.map_spacing);
    const sim::Vec2 m = sim::to_local((a + b) * 0.5, ep, e.heading);
    const double dh = sim::normalize_angle(std::atan2(b.y - a.y, b.x - a.x) - e.heading);
    MapRow row{};
    row[0] = m.x / 20.0;
    row[1] = m.y / 5.0;
    row[2] = std::cos(dh);
    row[3] = std::sin(dh);
    row[4] = m.norm() / 50.0;
    const sim::NavCommand cmd = mid > r.length() ? sim::NavCommand::Void : r.command_at(std::max(0.0, mid));
    row[5 + static_cast<int>(cmd)] = 1.0;
    row[12] = e.speed / 10.0;
    row[13] = r.speed_limit / 10.0;
    f.map.push_back(row);
  }
  return f;
}

}  // namespace takead::policy

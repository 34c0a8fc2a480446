#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "takead/simworld/world.hpp"

namespace takead::sim {

using json = nlohmann::json;

namespace detail {

inline const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(where + key + ": missing field");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(where + key + ": wrong type (" + std::string(v.type_name()) + ")");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return get_as<T>(j, key, where);
}

inline json points_json(const std::vector<Vec2>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

inline std::vector<Vec2> points_from(const json& j, const std::string& where) {
  if (!j.is_array()) throw std::invalid_argument(where + ": expected an array of [x, y]");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& p = j[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw std::invalid_argument(where + "[" + std::to_string(i) + "]: expected [x, y]");
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

}  // namespace detail

inline json to_json(const ScenarioSpec& s) {
  json j;
  j["id"] = s.id;
  j["kind"] = std::string(to_string(s.kind));
  j["seed"] = s.seed;
  j["ego_initial_speed"] = s.ego_initial_speed;
  json r;
  r["waypoints"] = detail::points_json(s.route.path.points());
  json cmds = json::array();
  for (auto c : s.route.commands) cmds.push_back(std::string(to_string(c)));
  r["commands"] = cmds;
  r["lane_half_width"] = s.route.lane_half_width;
  r["speed_limit"] = s.route.speed_limit;
  r["time_budget"] = s.route.time_budget;
  j["route"] = r;
  json actors = json::array();
  for (const auto& a : s.actors) {
    json ja;
    ja["kind"] = std::string(to_string(a.kind));
    ja["length"] = a.length;
    ja["width"] = a.width;
    ja["path"] = detail::points_json(a.path);
    ja["start_s"] = a.start_s;
    ja["initial_speed"] = a.initial_speed;
    ja["trigger_jitter"] = a.trigger_jitter;
    ja["script"] = {{"type", std::string(to_string(a.script.type))},
                    {"cruise_speed", a.script.cruise_speed},
                    {"trigger_distance", a.script.trigger_distance},
                    {"decel", a.script.decel},
                    {"accel", a.script.accel},
                    {"hold_time", a.script.hold_time}};
    actors.push_back(ja);
  }
  j["actors"] = actors;
  if (s.stop_line_s) j["stop_line_s"] = *s.stop_line_s;
  return j;
}

// Accepts either a full spec or a short {kind, seed} form that is expanded by
// the generator. Errors name the offending field.
inline ScenarioSpec scenario_from_json(const json& j, const std::string& where = "scenario.") {
  ScenarioSpec s;
  try {
    s.kind = scenario_kind_from(detail::get_as<std::string>(j, "kind", where));
  } catch (const std::invalid_argument& e) {
    if (std::string(e.what()).rfind(where, 0) == 0) throw;
    throw std::invalid_argument(where + "kind: " + e.what());
  }
  s.seed = detail::get_as<std::uint64_t>(j, "seed", where);
  if (!j.contains("route")) {
    s = make_scenario(s.kind, s.seed);
    if (j.contains("id")) s.id = detail::get_as<std::string>(j, "id", where);
    return s;
  }
  s.id = detail::get_or<std::string>(j, "id", scenario_id(s.kind, s.seed), where);
  s.ego_initial_speed = detail::get_or<double>(j, "ego_initial_speed", 0.0, where);
  const json& r = detail::field(j, "route", where);
  const std::string rw = where + "route.";
  std::vector<NavCommand> cmds;
  const json& jc = detail::field(r, "commands", rw);
  if (!jc.is_array()) throw std::invalid_argument(rw + "commands: expected an array");
  for (std::size_t i = 0; i < jc.size(); ++i) {
    if (!jc[i].is_string()) throw std::invalid_argument(rw + "commands[" + std::to_string(i) + "]: expected a string");
    try {
      cmds.push_back(nav_command_from(jc[i].get<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(rw + "commands[" + std::to_string(i) + "]: " + e.what());
    }
  }
  try {
    s.route.path = Polyline(detail::points_from(detail::field(r, "waypoints", rw), rw + "waypoints"));
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    if (msg.rfind(rw, 0) == 0) throw;
    throw std::invalid_argument(rw + "waypoints: " + msg);
  }
  s.route.commands = std::move(cmds);
  s.route.lane_half_width = detail::get_or<double>(r, "lane_half_width", 1.75, rw);
  s.route.speed_limit = detail::get_or<double>(r, "speed_limit", 8.0, rw);
  s.route.time_budget = detail::get_or<double>(r, "time_budget", default_time_budget(s.route.path.length()), rw);
  if (j.contains("actors")) {
    const json& ja = j.at("actors");
    if (!ja.is_array()) throw std::invalid_argument(where + "actors: expected an array");
    for (std::size_t i = 0; i < ja.size(); ++i) {
      const std::string aw = where + "actors[" + std::to_string(i) + "].";
      const json& a = ja[i];
      ActorSpec as;
      as.kind = actor_kind_from(detail::get_or<std::string>(a, "kind", "vehicle", aw));
      as.length = detail::get_or<double>(a, "length", as.length, aw);
      as.width = detail::get_or<double>(a, "width", as.width, aw);
      as.path = detail::points_from(detail::field(a, "path", aw), aw + "path");
      as.start_s = detail::get_or<double>(a, "start_s", 0.0, aw);
      as.initial_speed = detail::get_or<double>(a, "initial_speed", 0.0, aw);
      as.trigger_jitter = detail::get_or<double>(a, "trigger_jitter", 0.0, aw);
      if (a.contains("script")) {
        const json& sc = a.at("script");
        const std::string sw = aw + "script.";
        as.script.type = script_type_from(detail::get_or<std::string>(sc, "type", "static", sw));
        as.script.cruise_speed = detail::get_or<double>(sc, "cruise_speed", 0.0, sw);
        as.script.trigger_distance = detail::get_or<double>(sc, "trigger_distance", 0.0, sw);
        as.script.decel = detail::get_or<double>(sc, "decel", 6.0, sw);
        as.script.accel = detail::get_or<double>(sc, "accel", 2.0, sw);
        as.script.hold_time = detail::get_or<double>(sc, "hold_time", 3.0, sw);
      }
      s.actors.push_back(std::move(as));
    }
  }
  if (j.contains("stop_line_s")) s.stop_line_s = detail::get_as<double>(j, "stop_line_s", where);
  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + e.what());
  }
  return s;
}

inline std::vector<ScenarioSpec> suite_from_json(const json& j) {
  const json& arr = j.is_array() ? j : detail::field(j, "scenarios", "suite.");
  if (!arr.is_array()) throw std::invalid_argument("suite.scenarios: expected an array");
  std::vector<ScenarioSpec> out;
  for (std::size_t i = 0; i < arr.size(); ++i)
    out.push_back(scenario_from_json(arr[i], "scenarios[" + std::to_string(i) + "]."));
  return out;
}

// Standard suite: every kind crossed with the given seeds, ordered by
// (kind, seed).
inline std::vector<ScenarioSpec> make_suite(const std::vector<std::uint64_t>& seeds,
                                            const std::vector<ScenarioKind>& kinds = {kAllScenarioKinds.begin(),
                                                                                      kAllScenarioKinds.end()}) {
  std::vector<ScenarioSpec> out;
  for (auto k : kinds)
    for (auto s : seeds) out.push_back(make_scenario(k, s));
  return out;
}

// One line of an exported episode trace.
struct FrameRecord {
  double time = 0.0;
  EgoState ego;
  std::vector<ActorState> actors;
  ControlCommand command;
  std::vector<InfractionEvent> infractions;
  double progress = 0.0;
};

inline json to_json(const FrameRecord& f) {
  json j;
  j["time"] = f.time;
  j["ego"] = {{"x", f.ego.x}, {"y", f.ego.y}, {"heading", f.ego.heading}, {"speed", f.ego.speed}};
  json actors = json::array();
  for (const auto& a : f.actors)
    actors.push_back({{"id", a.id}, {"x", a.x}, {"y", a.y}, {"heading", a.heading}, {"speed", a.speed}});
  j["actors"] = actors;
  j["command"] = {{"throttle", f.command.throttle}, {"brake", f.command.brake}, {"steer", f.command.steer}};
  json inf = json::array();
  for (const auto& e : f.infractions) inf.push_back({{"kind", std::string(to_string(e.kind))}, {"time", e.time}});
  j["infractions"] = inf;
  j["progress"] = f.progress;
  return j;
}

inline void write_trace(const std::string& path, const std::vector<FrameRecord>& frames) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write trace: " + path);
  for (const auto& fr : frames) f << to_json(fr).dump() << '\n';
}

}  // namespace takead::sim

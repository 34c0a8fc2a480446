#include <gtest/gtest.h>

#include <cmath>

#include "takead/expert/expert.hpp"
#include "takead/simworld/io.hpp"

using namespace takead;
using namespace takead::sim;
using namespace takead::expert;

namespace {

ScenarioSpec straight_spec(double length, std::vector<ActorSpec> actors = {}, double ego_speed = 0.0,
                           double limit = 10.0) {
  ScenarioSpec s;
  s.id = "straight";
  s.route = RouteBuilder().straight(length, NavCommand::LaneFollow).build(limit);
  s.ego_initial_speed = ego_speed;
  s.actors = std::move(actors);
  return s;
}

ActorSpec parked_at(double x, double y = 0.0) {
  ActorSpec a;
  a.path = {{x, y}, {x + 1.0, y}};
  return a;
}

}  // namespace

TEST(Idm, FreeRoadEquilibrium) {
  ExpertConfig c;
  c.v0 = 8.0;
  World w = reset(straight_spec(200.0, {}, 8.0, 8.0));
  EXPECT_NEAR(idm_acceleration(c, 8.0, 8.0), 0.0, 1e-12);
  const ControlCommand cmd = expert_control(w, c);
  EXPECT_NEAR(cmd.steer, 0.0, 1e-9);
  EXPECT_EQ(cmd.brake, 0.0);
  EXPECT_NEAR(cmd.throttle, w.vehicle.drag * 64.0 / w.vehicle.max_accel, 1e-9);
}

TEST(Idm, StandstillBehindStoppedLeadGivesNoThrottle) {
  ExpertConfig c;
  EXPECT_LE(idm_acceleration(c, 0.0, 8.0, c.min_gap, 0.0), 1e-12);
  // Lead's rear bumper exactly s0 ahead of the ego's front bumper.
  World w = reset(straight_spec(200.0, {parked_at(4.6 + c.min_gap)}, 0.0));
  EXPECT_EQ(expert_control(w, c).throttle, 0.0);
}

TEST(Idm, ClosingOnSlowerLeadMatchesClosedForm) {
  ExpertConfig c;
  const double v = 10.0, vl = 5.0, s = 20.0, v0 = c.v0;
  const double s_star = c.min_gap + v * c.headway + v * (v - vl) / (2.0 * std::sqrt(c.max_accel * c.comfort_decel));
  const double expected = c.max_accel * (1.0 - std::pow(v / v0, 4.0) - std::pow(s_star / s, 2.0));
  EXPECT_NEAR(idm_acceleration(c, v, v0, s, vl), expected, 1e-12);
}

TEST(Expert, LeadingObstacleGapIsBumperToBumper) {
  World w = reset(straight_spec(200.0, {parked_at(20.0)}, 0.0));
  auto obs = leading_obstacle(view_of(w), ExpertConfig{});
  ASSERT_TRUE(obs.has_value());
  EXPECT_NEAR(obs->gap, 20.0 - 4.6, 1e-9);
  EXPECT_EQ(obs->speed, 0.0);
}

TEST(Expert, UnservedStopLineIsStandingObstacle) {
  ScenarioSpec s = straight_spec(100.0, {}, 5.0);
  s.stop_line_s = 30.0;
  World w = reset(s);
  auto obs = leading_obstacle(view_of(w), ExpertConfig{});
  ASSERT_TRUE(obs.has_value());
  EXPECT_EQ(obs->speed, 0.0);
  while (!w.done() && !w.stop_served) advance_world(w, expert_control(w));
  EXPECT_TRUE(w.stop_served);
  EXPECT_FALSE(leading_obstacle(view_of(w), ExpertConfig{}).has_value());
}

TEST(Expert, NoRouteRejected) {
  ExpertView v;
  EXPECT_THROW(expert_control(v), std::invalid_argument);
}

TEST(Expert, LabelHasSixWaypointsAndValidIndices) {
  World w = reset(make_scenario(ScenarioKind::Overtaking, 4));
  policy::ControlVocabulary vocab;
  for (int i = 0; i < 80; ++i) {
    const ExpertLabel l = expert_act(w, {}, vocab);
    EXPECT_EQ(l.trajectory.size(), 6u);
    EXPECT_LT(l.indices.throttle, 5);
    EXPECT_LT(l.indices.brake, 2);
    EXPECT_LT(l.indices.steer, 9);
    EXPECT_TRUE(l.command.in_range());
    advance_world(w, l.command);
  }
}

TEST(Expert, PlanIsForwardOnEmptyRoad) {
  World w = reset(straight_spec(200.0, {}, 6.0));
  const Trajectory t = plan_trajectory(view_of(w));
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_NEAR(t[k].y, 0.0, 1e-6);
    if (k > 0) {
      EXPECT_GT(t[k].x, t[k - 1].x);
    }
  }
  EXPECT_NEAR(t[0].x, 3.0, 0.3);  // about 6 m/s for 0.5 s
}

TEST(Expert, PureFunctionOfWorld) {
  World w = reset(make_scenario(ScenarioKind::GiveWay, 2));
  for (int i = 0; i < 100; ++i) advance_world(w, expert_control(w));
  const ExpertLabel a = expert_act(w);
  const World copy = w;
  const ExpertLabel b = expert_act(copy);
  EXPECT_EQ(a.indices, b.indices);
  EXPECT_EQ(a.command.throttle, b.command.throttle);
  EXPECT_EQ(a.command.steer, b.command.steer);
  for (std::size_t k = 0; k < a.trajectory.size(); ++k) EXPECT_EQ(a.trajectory[k], b.trajectory[k]);
}

TEST(Forecast, EmptyWorldIsNone) {
  World w = reset(straight_spec(100.0, {}, 10.0));
  EXPECT_FALSE(forecast_collision(w, 2.0).has_value());
}

TEST(Forecast, StationaryActorTenMetersAhead) {
  World w = reset(straight_spec(200.0, {parked_at(10.0 + 4.6)}, 10.0));
  auto t = forecast_collision(w, 2.0);
  ASSERT_TRUE(t.has_value());
  EXPECT_NEAR(*t, 1.0, kDt + 1e-9);
}

TEST(Forecast, CrossingActorMatchesReplay) {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(100 + trial);
    ActorSpec ped;
    ped.kind = ActorKind::Pedestrian;
    ped.length = ped.width = 0.6;
    const double x = rng.uniform(8.0, 25.0), y0 = rng.uniform(-8.0, -3.0);
    ped.path = {{x, y0}, {x, 10.0}};
    ped.initial_speed = rng.uniform(0.8, 3.0);
    ped.script = {ScriptType::Cruise, ped.initial_speed, 0.0, 0.0, 0.0, 0.0};
    World w = reset(straight_spec(200.0, {ped}, rng.uniform(3.0, 10.0)));
    std::optional<double> replay;
    const Vec2 ev = unit(w.ego.heading) * w.ego.speed;
    const ActorState& a = w.actors[0];
    for (int k = 0; k <= 60 && !replay; ++k) {
      const double t = k * 0.05;
      const OrientedBox eb{w.ego.position() + ev * t, w.ego.heading, 4.6, 2.0};
      const OrientedBox ab{{a.x, a.y + a.speed * t}, a.heading, 0.6, 0.6};
      if (boxes_overlap(eb, ab)) replay = t;
    }
    const auto got = forecast_collision(w, 3.0);
    ASSERT_EQ(got.has_value(), replay.has_value()) << trial;
    if (got) {
      EXPECT_NEAR(*got, *replay, 1e-12);
    }
  }
}

TEST(Forecast, MonotoneInHorizon) {
  for (auto kind : kAllScenarioKinds) {
    World w = reset(make_scenario(kind, 31));
    for (int i = 0; i < 400 && !w.done(); ++i) {
      advance_world(w, {0.6, 0.0, 0.0});
      if (i % 10) continue;
      bool found = false;
      for (double h = 0.5; h <= 4.0; h += 0.5) {
        const bool hit = forecast_collision(w, h).has_value();
        if (found) {
          ASSERT_TRUE(hit);
        }
        found = found || hit;
      }
    }
  }
}

TEST(Discretize, Examples) {
  policy::ControlVocabulary v;
  EXPECT_EQ(discretize_control({0.0, 0.0, 0.0}, v).steer, 4);
  EXPECT_EQ(discretize_control({0.0, 0.4, 0.0}, v).brake, 0);
  EXPECT_EQ(discretize_control({0.0, 0.5, 0.0}, v).brake, 0);  // tie goes low
  EXPECT_EQ(discretize_control({0.35, 0.0, 0.0}, v).throttle, 1);
}

TEST(Discretize, MatchesExhaustiveScan) {
  policy::ControlVocabulary v;
  Rng rng(5);
  for (int i = 0; i < 5000; ++i) {
    const ControlCommand c{rng.uniform(), rng.uniform(), rng.uniform(-1.0, 1.0)};
    const auto got = discretize_control(c, v);
    auto scan = [](const std::vector<double>& vals, double x) {
      int best = -1;
      for (int j = 0; j < static_cast<int>(vals.size()); ++j)
        if (best < 0 || std::abs(vals[j] - x) < std::abs(vals[best] - x)) best = j;
      return best;
    };
    EXPECT_EQ(got.throttle, scan(v.throttle, c.throttle));
    EXPECT_EQ(got.brake, scan(v.brake, c.brake));
    EXPECT_EQ(got.steer, scan(v.steer, c.steer));
    const double gap = std::abs(v.steer[got.steer] - c.steer);
    double half_bin = 1.0;
    for (std::size_t j = 1; j < v.steer.size(); ++j)
      if (c.steer >= v.steer[j - 1] && c.steer <= v.steer[j]) half_bin = 0.5 * (v.steer[j] - v.steer[j - 1]);
    EXPECT_LE(gap, half_bin + 1e-15);
  }
}

TEST(Expert, QualityGateOnTestSuite) {
  const auto suite = make_suite({3000, 3001, 3002, 3003, 3004});
  double total = 0.0;
  int collisions = 0;
  for (const auto& spec : suite) {
    World w = reset(spec);
    while (!w.done()) advance_world(w, expert_control(w));
    for (const auto& e : w.infractions) collisions += is_collision(e.kind) ? 1 : 0;
    total += 100.0 * route_completion(w) * infraction_score(w.infractions);
  }
  EXPECT_GE(total / static_cast<double>(suite.size()), 90.0);
  EXPECT_EQ(collisions, 0);
}

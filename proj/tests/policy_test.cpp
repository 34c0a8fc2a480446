#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "takead/policy/agent.hpp"

using namespace takead;
using namespace takead::policy;
using sim::ControlCommand;
using sim::Vec2;

namespace {

TrajectoryVocabulary random_vocab(std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  TrajectoryVocabulary v;
  for (std::size_t j = 0; j < k; ++j) {
    TrajVec t{};
    const double speed = rng.uniform(0.0, 10.0), curve = rng.uniform(-0.1, 0.1);
    for (std::size_t i = 0; i < 6; ++i) {
      const double s = speed * 0.5 * static_cast<double>(i + 1);
      t[2 * i] = s;
      t[2 * i + 1] = 0.5 * curve * s * s;
    }
    v.centers.push_back(t);
  }
  return v;
}

sim::ScenarioSpec straight_spec(std::vector<sim::ActorSpec> actors = {}, double ego_speed = 0.0) {
  sim::ScenarioSpec s;
  s.id = "straight";
  s.route = sim::RouteBuilder().straight(200.0, sim::NavCommand::LaneFollow).build(10.0);
  s.ego_initial_speed = ego_speed;
  s.actors = std::move(actors);
  return s;
}

sim::ActorSpec parked_at(double x, double y = 0.0, double heading = 0.0) {
  sim::ActorSpec a;
  a.path = {{x, y}, {x + std::cos(heading), y + std::sin(heading)}};
  return a;
}

void zero_param(Policy& p, const std::string& name) {
  for (auto& v : p.params()[p.params().index(name)].value.values()) v = 0.0;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(Scene, EmptyWorldMasksAllAgents) {
  sim::World w = sim::reset(straight_spec());
  const SceneFeatures f = extract_features(w);
  EXPECT_TRUE(f.agents.empty());
  EXPECT_EQ(f.map.size(), 16u);
  Policy p({}, random_vocab(8, 1));
  diffnum::Tape t;
  const auto s = p.encode_scene(t, f);
  EXPECT_EQ(std::count(s.agent_mask.begin(), s.agent_mask.end(), true), 0);
  EXPECT_EQ(t.value(s.agents).rows(), 8u);
}

TEST(Scene, NearestActorTakesSlotZero) {
  sim::World w = sim::reset(straight_spec({parked_at(30.0), parked_at(10.0), parked_at(-25.0)}));
  const SceneFeatures f = extract_features(w);
  ASSERT_EQ(f.agents.size(), 3u);
  EXPECT_NEAR(f.agents[0][0] * 20.0, 10.0, 1e-9);
  EXPECT_NEAR(f.agents[0][1], 0.0, 1e-12);
  EXPECT_NEAR(f.agents[1][0] * 20.0, -25.0, 1e-9);
}

TEST(Scene, StopLineBecomesAgentToken) {
  sim::ScenarioSpec s = straight_spec();
  s.stop_line_s = 25.0;
  const SceneFeatures f = extract_features(sim::reset(s));
  ASSERT_EQ(f.agents.size(), 1u);
  EXPECT_EQ(f.agents[0][8 + static_cast<int>(TokenKind::StopLine)], 1.0);
}

// Equidistant actors can be stored in any order; attention over the keys is
// a set function, checked against a direct softmax evaluation.
TEST(Scene, AttentionInvariantToPermutedAgents) {
  Policy p({}, random_vocab(6, 2));
  sim::World w = sim::reset(straight_spec({parked_at(0.0, 12.0, 1.0), parked_at(12.0, 0.0, 0.3),
                                           parked_at(0.0, -12.0, -2.0)}));
  SceneFeatures f = extract_features(w);
  ASSERT_EQ(f.agents.size(), 3u);
  SceneFeatures g = f;
  std::swap(g.agents[0], g.agents[2]);
  std::swap(g.agents[1], g.agents[2]);
  diffnum::Tape t;
  const auto sf = p.encode_scene(t, f), sg = p.encode_scene(t, g);
  Var q = p.p(t, "ctrl.tokens");
  const Tensor a = t.value(p.cross_attend(t, "ctrl.agt", q, sf.agents, sf.agent_mask));
  const Tensor b = t.value(p.cross_attend(t, "ctrl.agt", q, sg.agents, sg.agent_mask));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);

  // Direct evaluation for the first query row.
  const Tensor Q = t.value(diffnum::linear(t, q, p.p(t, "ctrl.agt.wq"), p.p(t, "ctrl.agt.bq")));
  const Tensor K = t.value(diffnum::linear(t, sf.agents, p.p(t, "ctrl.agt.wk"), p.p(t, "ctrl.agt.bk")));
  const Tensor V = t.value(diffnum::linear(t, sf.agents, p.p(t, "ctrl.agt.wv"), p.p(t, "ctrl.agt.bv")));
  const std::size_t c = Q.cols();
  std::vector<double> score(3);
  for (std::size_t j = 0; j < 3; ++j) {
    double d = 0.0;
    for (std::size_t x = 0; x < c; ++x) d += Q.at(0, x) * K.at(j, x);
    score[j] = d / std::sqrt(static_cast<double>(c));
  }
  const double m = *std::max_element(score.begin(), score.end());
  double z = 0.0;
  for (double& s : score) z += (s = std::exp(s - m));
  const Tensor Q0 = t.value(q);
  for (std::size_t x = 0; x < c; ++x) {
    double o = Q0.at(0, x);
    for (std::size_t j = 0; j < 3; ++j) o += score[j] / z * V.at(j, x);
    EXPECT_NEAR(a.at(0, x), o, 1e-12);
  }
}

TEST(Scene, MaskedSlotContentIsIgnored) {
  Policy p({}, random_vocab(6, 3));
  diffnum::Tape t;
  Var q = p.p(t, "traj.base");
  Tensor k1(8, 64), k2(8, 64);
  Rng rng(4);
  for (std::size_t i = 0; i < k1.size(); ++i) k1[i] = k2[i] = rng.normal();
  for (std::size_t i = 3 * 64; i < k2.size(); ++i) k2[i] = 50.0 * rng.normal();
  std::vector<bool> mask{true, true, true, false, false, false, false, false};
  const Tensor a = t.value(p.cross_attend(t, "traj.agt", q, t.constant(k1), mask));
  const Tensor b = t.value(p.cross_attend(t, "traj.agt", q, t.constant(k2), mask));
  EXPECT_EQ(a, b);
}

TEST(TrajectoryBranch, ZeroHeadGivesUniform) {
  Policy p({}, random_vocab(64, 5));
  zero_param(p, "traj.head.l2.w");
  zero_param(p, "traj.head.l2.b");
  sim::World w = sim::reset(straight_spec({parked_at(15.0)}, 4.0));
  const PolicyOutput o = infer(p, extract_features(w));
  for (double s : o.traj_scores) EXPECT_EQ(s, 0.5);
  for (double d : o.traj_dist) EXPECT_NEAR(d, 1.0 / 64.0, 1e-15);
}

TEST(TrajectoryBranch, DuplicateCandidatesScoreIdentically) {
  TrajectoryVocabulary v = random_vocab(10, 6);
  v.centers[7] = v.centers[2];
  Policy p({}, v);
  // Give both rows the same base embedding so only the waypoints matter.
  auto& base = p.params()[p.params().index("traj.base")].value;
  for (std::size_t c = 0; c < 64; ++c) base[7 * 64 + c] = base[2 * 64 + c];
  const PolicyOutput o = infer(p, extract_features(sim::reset(straight_spec({}, 3.0))));
  EXPECT_EQ(o.traj_scores[2], o.traj_scores[7]);
}

TEST(TrajectoryBranch, RejectsNonOneHotCommand) {
  Policy p({}, random_vocab(4, 7));
  diffnum::Tape t;
  const auto s = p.encode_scene(t, extract_features(sim::reset(straight_spec())));
  std::array<double, 7> cmd{};
  EXPECT_THROW(p.trajectory_logits(t, s, cmd, p.trajectory_static(t)), std::invalid_argument);
  cmd[1] = 1.0;
  cmd[2] = 1.0;
  EXPECT_THROW(p.trajectory_logits(t, s, cmd, p.trajectory_static(t)), std::invalid_argument);
  cmd[2] = 0.0;
  EXPECT_NO_THROW(p.trajectory_logits(t, s, cmd, p.trajectory_static(t)));
}

TEST(ControlBranch, ZeroHeadGivesUniformGroups) {
  Policy p({}, random_vocab(8, 8));
  zero_param(p, "ctrl.head.l2.w");
  zero_param(p, "ctrl.head.l2.b");
  const PolicyOutput o = infer(p, extract_features(sim::reset(straight_spec({parked_at(9.0)}, 2.0))));
  for (double d : o.ctrl_dist[0]) EXPECT_NEAR(d, 1.0 / 5.0, 1e-15);
  for (double d : o.ctrl_dist[1]) EXPECT_NEAR(d, 1.0 / 2.0, 1e-15);
  for (double d : o.ctrl_dist[2]) EXPECT_NEAR(d, 1.0 / 9.0, 1e-15);
}

TEST(Policy, DistributionsValidForRandomParameters) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    PolicyConfig cfg;
    cfg.init_seed = seed;
    Policy p(cfg, random_vocab(32, seed));
    Rng rng(seed);
    for (auto& prm : p.params())
      for (double& v : const_cast<diffnum::Parameter&>(prm).value.values()) v = 3.0 * rng.normal();
    sim::World w = sim::reset(sim::make_scenario(sim::ScenarioKind::GiveWay, seed));
    const PolicyOutput o = infer(p, extract_features(w));
    EXPECT_NEAR(sum(o.traj_dist), 1.0, 1e-12);
    for (const auto& g : o.ctrl_dist) {
      EXPECT_NEAR(sum(g), 1.0, 1e-12);
      for (double d : g) EXPECT_GE(d, 0.0);
    }
    for (double s : o.traj_scores) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
    for (double d : o.traj_dist) EXPECT_GE(d, 0.0);
    EXPECT_EQ(flatten(o.plan), p.vocabulary().centers[o.traj_index]);
  }
}

TEST(SampleTop1, ArgmaxAndTies) {
  EXPECT_EQ(argmax({0.1, 0.7, 0.2}), 1u);
  EXPECT_EQ(argmax({0.5, 0.5}), 0u);
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> s(20);
    for (double& x : s) x = rng.uniform(0.01, 1.0);
    std::vector<double> t = s;
    const double c = rng.uniform(0.1, 10.0);
    for (double& x : t) x = std::log(c * x) * 3.0 + 1.0;  // strictly increasing
    EXPECT_EQ(argmax(s), argmax(t));
  }
}

TEST(Pid, StraightAtCurrentSpeed) {
  PidTracker pid;
  sim::EgoState ego{0, 0, 0, 6.0};
  expert::Trajectory plan{};
  for (std::size_t i = 0; i < 6; ++i) plan[i] = {6.0 * 0.5 * static_cast<double>(i + 1), 0.0};
  const ControlCommand c = pid.track(plan, ego);
  EXPECT_NEAR(c.steer, 0.0, 1e-12);
  EXPECT_LT(c.throttle, 0.05);
  EXPECT_LT(c.brake, 0.05);
}

TEST(Pid, DegenerateTrajectoryBrakes) {
  PidTracker pid;
  const ControlCommand c = pid.track(expert::Trajectory{}, sim::EgoState{0, 0, 0, 3.0});
  EXPECT_EQ(c.brake, 1.0);
  EXPECT_EQ(c.steer, 0.0);
  EXPECT_EQ(c.throttle, 0.0);
}

// Replan the same arc every tick; the realized curvature of the driven path
// must match the arc.
TEST(Pid, ConstantCurvatureClosedLoop) {
  for (double radius : {15.0, 25.0, -20.0}) {
    PidTracker pid;
    sim::EgoState ego{0, 0, 0, 4.0};
    const double v = 4.0;
    expert::Trajectory plan{};
    for (std::size_t i = 0; i < 6; ++i) {
      const double s = v * 0.5 * static_cast<double>(i + 1), a = s / radius;
      plan[i] = {radius * std::sin(a), radius * (1.0 - std::cos(a))};
    }
    sim::VehicleParams vp;
    for (int i = 0; i < 200; ++i) ego = sim::step_kinematics(ego, pid.track(plan, ego, vp), sim::kDt, vp);
    double dist = 0.0, dh = 0.0;
    for (int i = 0; i < 40; ++i) {
      const sim::EgoState n = sim::step_kinematics(ego, pid.track(plan, ego, vp), sim::kDt, vp);
      dist += std::hypot(n.x - ego.x, n.y - ego.y);
      dh += sim::normalize_angle(n.heading - ego.heading);
      ego = n;
    }
    const double kappa = dh / dist;
    EXPECT_NEAR(kappa * radius, 1.0, 0.1) << radius;
  }
}

TEST(Ensemble, Examples) {
  EXPECT_EQ(ensemble({0.6, 0, 0}, {0.4, 0, 0}).throttle, 0.5);
  EXPECT_EQ(ensemble({0, 0, -0.2}, {0, 0, 0.4}).steer, 0.1);
  EXPECT_EQ(ensemble({0, 1, 0}, {0, 0, 0}).brake, 1.0);
}

TEST(Ensemble, BoundsProperty) {
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    const ControlCommand a{rng.uniform(), rng.uniform(), rng.uniform(-1, 1)};
    const ControlCommand b{rng.uniform(), rng.uniform(), rng.uniform(-1, 1)};
    const ControlCommand e = ensemble(a, b);
    EXPECT_GE(e.brake, std::max(a.brake, b.brake));
    EXPECT_GE(e.throttle, std::min(a.throttle, b.throttle));
    EXPECT_LE(e.throttle, std::max(a.throttle, b.throttle));
    EXPECT_GE(e.steer, std::min(a.steer, b.steer));
    EXPECT_LE(e.steer, std::max(a.steer, b.steer));
  }
}

TEST(SafetyCreep, ClearRoadOverridesForTwentyTicks) {
  sim::World w = sim::reset(straight_spec());
  SafetyCreep creep;
  int first = -1, count = 0;
  for (int i = 0; i < 70; ++i) {
    const auto o = creep.update(w, {0.0, 1.0, 0.05});
    if (o) {
      if (first < 0) first = i;
      ++count;
      EXPECT_EQ(o->throttle, 0.7);
      EXPECT_EQ(o->brake, 0.0);
      EXPECT_EQ(o->steer, 0.05);
    }
  }
  EXPECT_EQ(first, 49);  // 50 still ticks = 2.5 s
  EXPECT_EQ(count, 20);
}

TEST(SafetyCreep, LeadWithinGateBlocks) {
  sim::World w = sim::reset(straight_spec({parked_at(4.6 + 5.0)}));
  SafetyCreep creep;
  for (int i = 0; i < 200; ++i) EXPECT_FALSE(creep.update(w, {}).has_value());
}

TEST(SafetyCreep, MovingEgoNeverOverrides) {
  sim::World w = sim::reset(straight_spec({}, 1.0));
  SafetyCreep creep;
  for (int i = 0; i < 200; ++i) EXPECT_FALSE(creep.update(w, {}).has_value());
}

TEST(KMeans, SingleClusterIsMean) {
  Rng rng(11);
  std::vector<TrajVec> data(50);
  TrajVec mean{};
  for (auto& t : data)
    for (std::size_t d = 0; d < kTrajDims; ++d) {
      t[d] = rng.normal() * 5.0;
      mean[d] += t[d] / 50.0;
    }
  const auto v = build_vocabulary(data, 1, 3);
  for (std::size_t d = 0; d < kTrajDims; ++d) EXPECT_NEAR(v.centers[0][d], mean[d], 1e-9);
}

TEST(KMeans, DistinctInputsAreTheirOwnCenters) {
  const auto data = random_vocab(12, 12).centers;
  const auto r = kmeans(data, 12, 4);
  EXPECT_EQ(r.cost_history.back(), 0.0);
  auto got = r.vocab.centers, want = data;
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  EXPECT_EQ(got, want);
}

TEST(KMeans, CostNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<TrajVec> data(400);
    for (auto& t : data)
      for (double& x : t) x = rng.normal() * 3.0 + (rng.uniform() < 0.5 ? 5.0 : -5.0);
    const auto r = kmeans(data, 16, seed);
    // Recompute each iteration's cost independently from the final state too.
    EXPECT_NEAR(r.cost_history.back(), clustering_cost(data, r.vocab.centers, r.assignment), 1e-6);
    for (std::size_t i = 1; i < r.cost_history.size(); ++i)
      EXPECT_LE(r.cost_history[i], r.cost_history[i - 1] * (1.0 + 1e-12)) << seed << " it " << i;
  }
}

TEST(KMeans, DeterministicAndDistinct) {
  const auto data = random_vocab(300, 13).centers;
  const auto a = build_vocabulary(data, 20, 9), b = build_vocabulary(data, 20, 9);
  EXPECT_EQ(a.centers, b.centers);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) EXPECT_NE(a.centers[i], a.centers[j]);
}

TEST(KMeans, TooFewDistinctRejected) {
  std::vector<TrajVec> data(10, TrajVec{});
  data[3][0] = 1.0;
  EXPECT_THROW(build_vocabulary(data, 3, 0), std::invalid_argument);
}

TEST(Vocabulary, NdjsonRoundTrip) {
  const auto v = random_vocab(9, 14);
  std::istringstream in(vocabulary_ndjson(v));
  const auto r = parse_vocabulary(in);
  EXPECT_EQ(r.centers, v.centers);
  EXPECT_EQ(r.hash(), v.hash());
}

TEST(Vocabulary, BadLineNamed) {
  std::string text = vocabulary_ndjson(random_vocab(4, 15));
  text.insert(text.find('\n', text.find('\n') + 1) + 1, "{\"index\": 2, \"traj\": [1]}\n");
  std::istringstream in(text);
  try {
    parse_vocabulary(in, "v.ndjson");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("v.ndjson:3"), std::string::npos) << e.what();
  }
}

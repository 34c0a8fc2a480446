#pragma once

// Small synthetic policies and samples shared by the train and data tests.

#include <vector>

#include "takead/data/dataset.hpp"
#include "takead/policy/network.hpp"

namespace takead::fixture {

inline policy::PolicyConfig small_config(std::uint64_t seed = 7) {
  policy::PolicyConfig c;
  c.embed = 8;
  c.hidden = 8;
  c.scene.max_agents = 3;
  c.scene.map_tokens = 4;
  c.init_seed = seed;
  c.head_init_scale = 1.0;
  return c;
}

inline policy::TrajVec random_traj(Rng& rng) {
  policy::TrajVec v{};
  double x = 0.0, y = 0.0;
  const double speed = rng.uniform(0.5, 4.0), curve = rng.uniform(-0.3, 0.3);
  for (std::size_t i = 0; i < 6; ++i) {
    x += speed;
    y += curve * static_cast<double>(i + 1);
    v[2 * i] = x;
    v[2 * i + 1] = y;
  }
  return v;
}

inline policy::TrajectoryVocabulary random_vocab(std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  policy::TrajectoryVocabulary v;
  for (std::size_t j = 0; j < k; ++j) v.centers.push_back(random_traj(rng));
  return v;
}

inline data::DemoSample random_sample(Rng& rng, const policy::PolicyConfig& cfg,
                                      const policy::ControlVocabulary& cv = {}) {
  data::DemoSample s;
  const std::size_t na = 1 + rng.below(cfg.scene.max_agents);
  for (std::size_t i = 0; i < na; ++i) {
    policy::AgentRow r{};
    for (auto& x : r) x = rng.uniform(-1.0, 1.0);
    s.features.agents.push_back(r);
  }
  for (std::size_t j = 0; j < cfg.scene.map_tokens; ++j) {
    policy::MapRow r{};
    for (auto& x : r) x = rng.uniform(-1.0, 1.0);
    s.features.map.push_back(r);
  }
  s.features.command = static_cast<sim::NavCommand>(rng.below(sim::kNavCommandCount));
  s.features.ego_speed = rng.uniform(0.0, 9.0);
  s.expert_traj = random_traj(rng);
  s.ctrl = {static_cast<int>(rng.below(cv.throttle.size())), static_cast<int>(rng.below(cv.brake.size())),
            static_cast<int>(rng.below(cv.steer.size()))};
  s.scenario_id = "synthetic_" + std::to_string(rng.below(1000));
  s.time = 0.05 * static_cast<double>(rng.below(2000));
  return s;
}

inline std::vector<data::DemoSample> random_samples(std::size_t n, std::uint64_t seed,
                                                    const policy::PolicyConfig& cfg) {
  Rng rng(seed);
  std::vector<data::DemoSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_sample(rng, cfg));
  return out;
}

}  // namespace takead::fixture

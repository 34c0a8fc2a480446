#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "takead/diffnum/tape.hpp"

namespace takead::diffnum {

enum class Method { Sgd, Adam };
enum class ScheduleKind { Constant, Cosine };

struct OptimizerConfig {
  Method method = Method::Adam;
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  ScheduleKind schedule = ScheduleKind::Constant;
  // Cosine annealing runs over this many steps and ends at
  // learning_rate * min_lr_ratio on the last one.
  std::size_t total_steps = 1;
  double min_lr_ratio = 0.01;
};

enum class StepStatus { Applied, AbortedNonFinite };

struct OptimizerState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

class Optimizer {
 public:
  Optimizer(const ParameterSet& ps, OptimizerConfig cfg) : cfg_(cfg) {
    if (!(cfg_.learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning rate must be > 0");
    for (const auto& p : ps) {
      state_.m.emplace_back(p.value.shape(), 0.0);
      state_.v.emplace_back(p.value.shape(), 0.0);
    }
  }

  const OptimizerConfig& config() const { return cfg_; }
  const OptimizerState& state() const { return state_; }

  // Learning rate used by step number `s` (0-based).
  double learning_rate_at(std::size_t s) const {
    if (cfg_.schedule == ScheduleKind::Constant) return cfg_.learning_rate;
    const double lo = cfg_.learning_rate * cfg_.min_lr_ratio;
    const double progress =
        cfg_.total_steps > 1 ? std::min(1.0, static_cast<double>(s) / static_cast<double>(cfg_.total_steps - 1)) : 1.0;
    return lo + 0.5 * (cfg_.learning_rate - lo) * (1.0 + std::cos(std::numbers::pi * progress));
  }

  // Updates parameters whose group is in `trainable` (all when empty).
  // A non-finite gradient anywhere aborts the whole step.
  StepStatus step(ParameterSet& ps, const Gradients& grads, const std::vector<std::string>& trainable = {}) {
    if (grads.size() != ps.size()) throw std::invalid_argument("optimizer: gradient count mismatch");
    for (const auto& g : grads)
      if (!g.all_finite()) return StepStatus::AbortedNonFinite;
    const double lr = learning_rate_at(state_.step);
    ++state_.step;
    const double t = static_cast<double>(state_.step);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (!is_trainable(ps[i].group, trainable)) continue;
      Tensor& w = ps[i].value;
      const Tensor& g = grads[i];
      if (!w.same_shape(g)) throw std::invalid_argument("optimizer: gradient shape mismatch for " + ps[i].name);
      if (cfg_.method == Method::Sgd) {
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
        continue;
      }
      Tensor& m = state_.m[i];
      Tensor& v = state_.v[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
      }
    }
    return StepStatus::Applied;
  }

 private:
  static bool is_trainable(const std::string& group, const std::vector<std::string>& trainable) {
    if (trainable.empty()) return true;
    for (const auto& t : trainable)
      if (t == group) return true;
    return false;
  }

  OptimizerConfig cfg_;
  OptimizerState state_;
};

}  // namespace takead::diffnum

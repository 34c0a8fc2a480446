#pragma once

#include <functional>
#include <memory>

#include "takead/policy/control.hpp"
#include "takead/policy/network.hpp"

namespace takead::policy {

// Anything that can drive a closed-loop episode.
class Driver {
 public:
  virtual ~Driver() = default;
  virtual void begin_episode(const sim::World&) {}
  virtual ControlCommand act(const sim::World& w) = 0;
  // Network outputs behind the last act(), for learned drivers.
  virtual const PolicyOutput* last_policy_output() const { return nullptr; }
};

class ExpertDriver : public Driver {
 public:
  explicit ExpertDriver(expert::ExpertConfig cfg = {}) : cfg_(cfg) {}
  ControlCommand act(const sim::World& w) override { return expert::expert_control(w, cfg_); }

 private:
  expert::ExpertConfig cfg_;
};

// Wraps a plain function (scripted test policies).
class FunctionDriver : public Driver {
 public:
  explicit FunctionDriver(std::function<ControlCommand(const sim::World&)> fn) : fn_(std::move(fn)) {}
  ControlCommand act(const sim::World& w) override { return fn_(w); }

 private:
  std::function<ControlCommand(const sim::World&)> fn_;
};

// The learned policy: both branches, PID tracking of the planned trajectory,
// the ensemble, then the safety-creep override.
class PolicyDriver : public Driver {
 public:
  PolicyDriver(const Policy& p, CreepConfig creep = {}, PidConfig pid = {})
      : policy_(p), pid_(pid), creep_(creep), static_(trajectory_static_tensor(p)) {}

  void begin_episode(const sim::World&) override {
    pid_.reset();
    creep_.reset();
  }

  ControlCommand act(const sim::World& w) override {
    last_ = infer(policy_, extract_features(w, policy_.config().scene), &static_);
    last_traj_cmd_ = pid_.track(last_.plan, w.ego, w.vehicle);
    last_ensemble_ = ensemble(last_.ctrl_command, last_traj_cmd_);
    const auto over = creep_.update(w, last_ensemble_);
    creep_active_ = over.has_value();
    return over ? *over : last_ensemble_;
  }

  const PolicyOutput& last_output() const { return last_; }
  const PolicyOutput* last_policy_output() const override { return &last_; }
  const ControlCommand& last_ensemble() const { return last_ensemble_; }
  const ControlCommand& last_traj_command() const { return last_traj_cmd_; }
  bool creep_active() const { return creep_active_; }

 private:
  const Policy& policy_;
  PidTracker pid_;
  SafetyCreep creep_;
  diffnum::Tensor static_;
  PolicyOutput last_;
  ControlCommand last_traj_cmd_;
  ControlCommand last_ensemble_;
  bool creep_active_ = false;
};

}  // namespace takead::policy

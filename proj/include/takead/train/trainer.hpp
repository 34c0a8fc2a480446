#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "takead/diffnum/optimizer.hpp"
#include "takead/train/losses.hpp"

namespace takead::train {

struct TrainConfig {
  double beta = 0.1;
  double gamma = 0.1;
  double label_tau = 1.0;  // m, soft trajectory target temperature
  std::size_t pretrain_epochs = 6;  // per stage
  std::size_t dagger_epochs = 1;
  std::size_t po_epochs = 10;
  double pretrain_lr = 2e-4;
  double dagger_lr = 5e-5;
  double po_lr = 1e-6;
  int rounds = 5;
  std::size_t batch_size = 16;
  double takeover_weight = 4.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(beta > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("train: beta and gamma must be > 0");
    if (!(label_tau > 0.0)) throw std::invalid_argument("train: label_tau must be > 0");
    if (pretrain_epochs < 1 || dagger_epochs < 1 || po_epochs < 1)
      throw std::invalid_argument("train: epochs must be >= 1");
    if (!(pretrain_lr > 0.0) || !(dagger_lr > 0.0) || !(po_lr > 0.0))
      throw std::invalid_argument("train: learning rates must be > 0");
    if (rounds < 0) throw std::invalid_argument("train: rounds must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(takeover_weight > 0.0)) throw std::invalid_argument("train: takeover_weight must be > 0");
  }
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BatchResult {
  double loss = 0.0;
  diffnum::Gradients grads;
  PreferenceStats pref;
};

// Mean loss over a batch on one tape; the scene-independent trajectory
// tokens are computed once and shared.
inline BatchResult batch_loss(const policy::Policy& p, const std::vector<const data::DemoSample*>& batch,
                              Objective obj, const TrainConfig& cfg, bool with_grad) {
  Tape t;
  const Var st = p.trajectory_static(t);
  Var total;
  BatchResult r;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto fv = p.forward(t, batch[i]->features, st);
    Var l = sample_loss(t, obj, p, fv, *batch[i], cfg.beta, cfg.gamma, cfg.label_tau, &r.pref);
    total = i == 0 ? l : diffnum::add(t, total, l);
  }
  Var mean = diffnum::scale(t, total, 1.0 / static_cast<double>(batch.size()));
  r.loss = t.value(mean)[0];
  if (with_grad && std::isfinite(r.loss)) r.grads = t.backward(mean);
  return r;
}

// Mean per-sample loss over a dataset without updating anything.
inline double mean_loss(const policy::Policy& p, const std::vector<data::DemoSample>& samples, Objective obj,
                        const TrainConfig& cfg, PreferenceStats* pref = nullptr) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  std::vector<const data::DemoSample*> batch;
  for (std::size_t i = 0; i < samples.size(); i += cfg.batch_size) {
    batch.clear();
    for (std::size_t j = i; j < std::min(samples.size(), i + cfg.batch_size); ++j) batch.push_back(&samples[j]);
    const auto r = batch_loss(p, batch, obj, cfg, false);
    sum += r.loss * static_cast<double>(batch.size());
    if (pref) {
      pref->margin += r.pref.margin;
      pref->groups += r.pref.groups;
      pref->clamped += r.pref.clamped;
    }
  }
  return sum / static_cast<double>(samples.size());
}

// Mean beta (ln pi(y_w) - ln pi(y_l)) over every pair of every sample.
inline double mean_margin(const policy::Policy& p, const std::vector<data::DemoSample>& samples,
                          const TrainConfig& cfg) {
  PreferenceStats s;
  mean_loss(p, samples, Objective::Preference, cfg, &s);
  return s.groups ? s.margin / s.groups : 0.0;
}

struct PhaseSpec {
  std::string name;
  Objective objective = Objective::Joint;
  std::vector<std::string> groups;  // empty: all
  double lr = 2e-4;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
};

struct PhaseReport {
  std::string name;
  std::vector<double> epoch_loss;  // mean training batch loss per epoch
  std::size_t steps = 0;
};

// Adam with cosine annealing over the whole phase. Batch order comes from
// `weights` (each sample repeated round(w) times) shuffled per epoch with a
// seed derived from (phase seed, epoch).
inline PhaseReport run_phase(policy::Policy& p, const std::vector<data::DemoSample>& samples,
                             const std::vector<double>& weights, const PhaseSpec& ph, const TrainConfig& cfg) {
  PhaseReport rep;
  rep.name = ph.name;
  if (samples.empty()) return rep;
  std::size_t per_epoch = 0;
  for (double w : weights) per_epoch += static_cast<std::size_t>(std::llround(w));
  const std::size_t batches = (per_epoch + cfg.batch_size - 1) / cfg.batch_size;
  diffnum::OptimizerConfig oc;
  oc.learning_rate = ph.lr;
  oc.schedule = diffnum::ScheduleKind::Cosine;
  oc.total_steps = std::max<std::size_t>(1, batches * ph.epochs);
  diffnum::Optimizer opt(p.params(), oc);
  std::vector<const data::DemoSample*> batch;
  for (std::size_t e = 0; e < ph.epochs; ++e) {
    const auto order = data::epoch_indices(weights, mix_seed(ph.seed, e));
    double sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      batch.clear();
      for (std::size_t j = b * cfg.batch_size; j < std::min(order.size(), (b + 1) * cfg.batch_size); ++j)
        batch.push_back(&samples[order[j]]);
      const auto r = batch_loss(p, batch, ph.objective, cfg, true);
      if (!std::isfinite(r.loss) ||
          opt.step(p.params(), r.grads, ph.groups) == diffnum::StepStatus::AbortedNonFinite)
        throw TrainingError(ph.name + ": non-finite loss at epoch " + std::to_string(e) + " batch " +
                            std::to_string(b));
      sum += r.loss;
      ++rep.steps;
    }
    rep.epoch_loss.push_back(sum / static_cast<double>(batches));
  }
  return rep;
}

inline std::vector<double> unit_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

struct PretrainReport {
  std::vector<PhaseReport> stages;
  double initial_traj = 0.0, initial_ctrl = 0.0;
  double final_traj = 0.0, final_ctrl = 0.0;
};

inline std::array<PhaseSpec, 3> pretrain_stages(const TrainConfig& cfg) {
  return {PhaseSpec{"pretrain stage 1", Objective::Trajectory, {policy::kEncoderGroup, policy::kTrajGroup},
                    cfg.pretrain_lr, cfg.pretrain_epochs, mix_seed(cfg.seed, 101)},
          PhaseSpec{"pretrain stage 2", Objective::Control, {policy::kCtrlGroup}, cfg.pretrain_lr, cfg.pretrain_epochs,
                    mix_seed(cfg.seed, 102)},
          PhaseSpec{"pretrain stage 3", Objective::Joint, {}, cfg.pretrain_lr, cfg.pretrain_epochs,
                    mix_seed(cfg.seed, 103)}};
}

// Stage 1: encoder + trajectory branch on L_traj. Stage 2: control branch
// alone on L_ctrl. Stage 3: everything on L_traj + L_ctrl.
inline PretrainReport pretrain(policy::Policy& p, const std::vector<data::DemoSample>& demos, const TrainConfig& cfg) {
  cfg.validate();
  if (demos.empty()) throw std::invalid_argument("pretrain: empty demonstration set");
  for (const auto& s : demos) data::validate(s, p.control_vocabulary());
  PretrainReport rep;
  rep.initial_traj = mean_loss(p, demos, Objective::Trajectory, cfg);
  rep.initial_ctrl = mean_loss(p, demos, Objective::Control, cfg);
  const auto w = unit_weights(demos.size());
  for (const auto& st : pretrain_stages(cfg)) rep.stages.push_back(run_phase(p, demos, w, st, cfg));
  rep.final_traj = mean_loss(p, demos, Objective::Trajectory, cfg);
  rep.final_ctrl = mean_loss(p, demos, Objective::Control, cfg);
  return rep;
}

// One DAgger pass (cfg.dagger_epochs) over the merged set, both branches.
inline PhaseReport dagger_epoch(policy::Policy& p, const data::DaggerDataset& d, const TrainConfig& cfg,
                                std::uint64_t seed) {
  if (d.vocab_hash != p.vocabulary().hash())
    throw data::DatasetError("dagger_epoch: dataset vocabulary " + hex64(d.vocab_hash) + " does not match policy " +
                             hex64(p.vocabulary().hash()));
  return run_phase(p, d.samples, d.weights, {"dagger", Objective::Joint, {}, cfg.dagger_lr, cfg.dagger_epochs, seed},
                   cfg);
}

struct PoReport {
  PhaseReport phase;
  double margin_before = 0.0, margin_after = 0.0;
  double loss_before = 0.0, loss_after = 0.0;
};

// Preference epochs on the current round's takeovers only.
inline PoReport po_epoch(policy::Policy& p, const std::vector<data::DemoSample>& takeovers, const TrainConfig& cfg,
                         std::uint64_t seed) {
  PoReport r;
  if (takeovers.empty()) return r;
  r.margin_before = mean_margin(p, takeovers, cfg);
  r.loss_before = mean_loss(p, takeovers, Objective::Preference, cfg);
  r.phase = run_phase(p, takeovers, unit_weights(takeovers.size()),
                      {"po", Objective::Preference, {}, cfg.po_lr, cfg.po_epochs, seed}, cfg);
  r.margin_after = mean_margin(p, takeovers, cfg);
  r.loss_after = mean_loss(p, takeovers, Objective::Preference, cfg);
  return r;
}

}  // namespace takead::train

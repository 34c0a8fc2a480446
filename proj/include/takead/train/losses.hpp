#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "takead/data/dataset.hpp"
#include "takead/policy/network.hpp"

namespace takead::train {

using diffnum::Tape;
using diffnum::Tensor;
using diffnum::Var;

inline constexpr double kLogProbFloor = -50.0;

// Expert trajectory as a distribution over the vocabulary:
// softmax(-d_j / tau), d_j the mean waypoint distance to center j in meters.
inline std::vector<double> soft_target(const policy::TrajVec& expert, const policy::TrajectoryVocabulary& v,
                                       double tau = 1.0) {
  if (!(tau > 0.0)) throw std::invalid_argument("soft_target: tau must be > 0");
  std::vector<double> z(v.size()), out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) z[j] = -policy::mean_waypoint_distance(expert, v.centers[j]) / tau;
  diffnum::detail::softmax_row(z.data(), out.data(), z.size());
  return out;
}

inline std::vector<double> one_hot(std::size_t n, std::size_t i) {
  if (i >= n) throw std::invalid_argument("one_hot: index " + std::to_string(i) + " out of " + std::to_string(n));
  std::vector<double> v(n, 0.0);
  v[i] = 1.0;
  return v;
}

// D_KL(target || predicted) with 0 ln 0 = 0.
inline double kl_divergence(std::span<const double> target, std::span<const double> predicted) {
  if (target.size() != predicted.size())
    throw std::invalid_argument("kl_loss: support mismatch (" + std::to_string(target.size()) + " vs " +
                                std::to_string(predicted.size()) + ")");
  double s = 0.0;
  for (std::size_t j = 0; j < target.size(); ++j)
    if (target[j] > 0.0) s += target[j] * (std::log(target[j]) - std::log(predicted[j]));
  return s;
}

// Same divergence on the tape, from predicted log-probabilities:
// sum t ln t - sum t ln p. Only the second term depends on parameters.
inline Var kl_loss(Tape& t, std::span<const double> target, Var log_pred) {
  const Tensor& lp = t.value(log_pred);
  if (target.size() != lp.size())
    throw std::invalid_argument("kl_loss: support mismatch (" + std::to_string(target.size()) + " vs " +
                                std::to_string(lp.size()) + ")");
  double neg_entropy = 0.0;
  for (double x : target)
    if (x > 0.0) neg_entropy += x * std::log(x);
  return diffnum::add_scalar(t, diffnum::scale(t, diffnum::dot_const(t, log_pred, target), -1.0), neg_entropy);
}

// ---- preference losses ----

inline double simpo_value(double log_pw, double log_pl, double beta, double gamma) {
  return -diffnum::log_sigmoid(beta * log_pw - beta * log_pl - gamma);
}

inline double po_value(double log_pw, double log_pl, double beta, double gamma) {
  return simpo_value(log_pw, log_pl, beta, gamma) + diffnum::log_sigmoid(-gamma);
}

struct PreferenceTerm {
  Var loss;
  std::size_t y_w = 0;
  std::size_t y_l = 0;  // argmax of the current distribution
  double margin = 0.0;  // beta (ln pi(y_w) - ln pi(y_l))
  bool clamped = false;
};

// -ln sigma(beta ln pi(y_w) - beta ln pi(y_l) - gamma), y_l recomputed as the
// argmax of `log_probs` under the current parameters.
inline PreferenceTerm simpo_loss(Tape& t, Var log_probs, std::size_t y_w, double beta, double gamma) {
  const Tensor lp = t.value(log_probs);
  if (y_w >= lp.size())
    throw std::invalid_argument("simpo_loss: y_w " + std::to_string(y_w) + " out of " + std::to_string(lp.size()));
  PreferenceTerm r;
  r.y_w = y_w;
  r.y_l = 0;
  for (std::size_t j = 1; j < lp.size(); ++j)
    if (lp[j] > lp[r.y_l]) r.y_l = j;
  Var lw = diffnum::gather(t, log_probs, y_w);
  if (lp[y_w] < kLogProbFloor) {
    lw = t.constant(Tensor::scalar(kLogProbFloor));
    r.clamped = true;
  }
  Var ll = diffnum::gather(t, log_probs, r.y_l);
  Var m = diffnum::scale(t, diffnum::sub(t, lw, ll), beta);
  r.margin = t.value(m)[0];
  r.loss = diffnum::scale(t, diffnum::log_sigmoid(t, diffnum::add_scalar(t, m, -gamma)), -1.0);
  return r;
}

// L_SimPO + ln sigma(-gamma); zero when the expert action is the argmax.
inline PreferenceTerm po_loss(Tape& t, Var log_probs, std::size_t y_w, double beta, double gamma) {
  PreferenceTerm r = simpo_loss(t, log_probs, y_w, beta, gamma);
  r.loss = diffnum::add_scalar(t, r.loss, diffnum::log_sigmoid(-gamma));
  return r;
}

// ---- per-sample objectives over a policy forward pass ----

enum class Objective { Trajectory, Control, Joint, Preference };

inline Var traj_kl(Tape& t, const policy::ForwardVars& fv, const data::DemoSample& s,
                   const policy::TrajectoryVocabulary& v, double tau) {
  return kl_loss(t, soft_target(s.expert_traj, v, tau), fv.traj_log_dist);
}

// Sum over the three independent control groups (KL of the product).
inline Var ctrl_kl(Tape& t, const policy::ForwardVars& fv, const data::DemoSample& s,
                   const policy::ControlVocabulary& cv) {
  Var total;
  for (int g = 0; g < 3; ++g) {
    const auto grp = static_cast<policy::ControlGroup>(g);
    const auto target = one_hot(cv.group_size(grp), static_cast<std::size_t>(s.ctrl[grp]));
    Var l = kl_loss(t, target, fv.ctrl_log_probs[static_cast<std::size_t>(g)]);
    total = g == 0 ? l : diffnum::add(t, total, l);
  }
  return total;
}

struct PreferenceStats {
  double margin = 0.0;  // summed over groups
  int groups = 0;
  int clamped = 0;
};

// Mean L_PO over four pairs: trajectory, throttle, brake, steer.
inline Var po_sample_loss(Tape& t, const policy::ForwardVars& fv, const data::DemoSample& s,
                          const policy::TrajectoryVocabulary& v, double beta, double gamma, double tau,
                          PreferenceStats* stats = nullptr) {
  const auto target = soft_target(s.expert_traj, v, tau);
  const std::size_t y_traj = policy::argmax(target);
  std::array<PreferenceTerm, 4> terms;
  terms[0] = po_loss(t, fv.traj_log_dist, y_traj, beta, gamma);
  for (int g = 0; g < 3; ++g)
    terms[static_cast<std::size_t>(g) + 1] =
        po_loss(t, fv.ctrl_log_probs[static_cast<std::size_t>(g)],
                static_cast<std::size_t>(s.ctrl[static_cast<policy::ControlGroup>(g)]), beta, gamma);
  Var sum = terms[0].loss;
  for (std::size_t i = 1; i < terms.size(); ++i) sum = diffnum::add(t, sum, terms[i].loss);
  if (stats) {
    for (const auto& p : terms) {
      stats->margin += p.margin;
      stats->clamped += p.clamped;
      ++stats->groups;
    }
  }
  return diffnum::scale(t, sum, 0.25);
}

inline Var sample_loss(Tape& t, Objective obj, const policy::Policy& p, const policy::ForwardVars& fv,
                       const data::DemoSample& s, double beta, double gamma, double tau,
                       PreferenceStats* stats = nullptr) {
  switch (obj) {
    case Objective::Trajectory: return traj_kl(t, fv, s, p.vocabulary(), tau);
    case Objective::Control: return ctrl_kl(t, fv, s, p.control_vocabulary());
    case Objective::Joint:
      return diffnum::add(t, traj_kl(t, fv, s, p.vocabulary(), tau), ctrl_kl(t, fv, s, p.control_vocabulary()));
    case Objective::Preference: return po_sample_loss(t, fv, s, p.vocabulary(), beta, gamma, tau, stats);
  }
  throw std::logic_error("sample_loss: bad objective");
}

}  // namespace takead::train

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "takead/diffnum/ops.hpp"
#include "takead/policy/control_vocabulary.hpp"
#include "takead/policy/features.hpp"
#include "takead/policy/trajectory_vocabulary.hpp"

namespace takead::policy {

using diffnum::ParameterSet;
using diffnum::Tape;
using diffnum::Tensor;
using diffnum::Var;

inline constexpr std::size_t kCommandSlots = sim::kNavCommandCount;  // 7
inline constexpr std::array<double, 4> kPeFrequencies{0.05, 0.15, 0.45, 1.35};  // rad per meter
inline constexpr std::size_t kPeDims = kTrajDims * 2 * kPeFrequencies.size();    // 96

struct PolicyConfig {
  std::size_t embed = 64;   // C
  std::size_t hidden = 64;  // MLP width
  SceneConfig scene;
  std::uint64_t init_seed = 7;
  double head_init_scale = 0.1;

  bool operator==(const PolicyConfig&) const = default;
};

// Parameter groups, used to freeze parts of the network per training stage.
inline constexpr const char* kEncoderGroup = "encoder";
inline constexpr const char* kTrajGroup = "traj";
inline constexpr const char* kCtrlGroup = "ctrl";

// Sinusoidal encoding of every waypoint coordinate.
inline std::vector<double> positional_encoding(const TrajVec& t) {
  std::vector<double> pe;
  pe.reserve(kPeDims);
  for (double x : t)
    for (double w : kPeFrequencies) {
      pe.push_back(std::sin(w * x));
      pe.push_back(std::cos(w * x));
    }
  return pe;
}

inline std::array<double, kCommandSlots> command_one_hot(sim::NavCommand c) { return sim::one_hot(c); }

inline void require_one_hot(const std::array<double, kCommandSlots>& cmd) {
  int ones = 0;
  for (double v : cmd) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      ones = -100;
    }
  }
  if (ones != 1) throw std::invalid_argument("trajectory_branch: command must be one-hot over 7 slots");
}

// Graph nodes for one frame.
struct ForwardVars {
  Var traj_logits;    // [k] pre-sigmoid scores
  Var traj_log_dist;  // [k] log of the normalized sigmoid distribution
  Var ctrl_logits;    // [N_c]
  std::array<Var, 3> ctrl_log_probs;  // per control group
};

class Policy {
 public:
  Policy(PolicyConfig cfg, TrajectoryVocabulary vocab, ControlVocabulary cvocab = {})
      : cfg_(cfg), vocab_(std::move(vocab)), cvocab_(std::move(cvocab)) {
    cvocab_.validate();
    if (vocab_.size() == 0) throw std::invalid_argument("policy: empty trajectory vocabulary");
    Tensor pe(vocab_.size(), kPeDims);
    for (std::size_t j = 0; j < vocab_.size(); ++j) {
      const auto row = positional_encoding(vocab_.centers[j]);
      std::copy(row.begin(), row.end(), pe.data() + j * kPeDims);
    }
    pe_ = std::move(pe);
    init_parameters();
  }

  const PolicyConfig& config() const { return cfg_; }
  const TrajectoryVocabulary& vocabulary() const { return vocab_; }
  const ControlVocabulary& control_vocabulary() const { return cvocab_; }
  ParameterSet& params() { return ps_; }
  const ParameterSet& params() const { return ps_; }
  std::size_t k() const { return vocab_.size(); }

  Var p(Tape& t, const std::string& name) const { return t.param(ps_, name); }

  Var mlp(Tape& t, const std::string& prefix, Var x) const {
    Var h = diffnum::relu(t, diffnum::linear(t, x, p(t, prefix + ".l1.w"), p(t, prefix + ".l1.b")));
    return diffnum::linear(t, h, p(t, prefix + ".l2.w"), p(t, prefix + ".l2.b"));
  }

  // Residual single-head cross-attention: q + attn(q Wq, kv Wk, kv Wv).
  Var cross_attend(Tape& t, const std::string& prefix, Var q, Var kv, const std::vector<bool>& mask) const {
    Var Q = diffnum::linear(t, q, p(t, prefix + ".wq"), p(t, prefix + ".bq"));
    Var K = diffnum::linear(t, kv, p(t, prefix + ".wk"), p(t, prefix + ".bk"));
    Var V = diffnum::linear(t, kv, p(t, prefix + ".wv"), p(t, prefix + ".bv"));
    return diffnum::add(t, q, diffnum::scaled_dot_attention(t, Q, K, V, mask));
  }

  struct SceneTokens {
    Var agents;  // [N_a, C]
    std::vector<bool> agent_mask;
    Var map;  // [N_m, C]
    std::vector<bool> map_mask;
  };

  // Empty agent slots stay zero and are masked out of attention.
  SceneTokens encode_scene(Tape& t, const SceneFeatures& f) const {
    const std::size_t na = cfg_.scene.max_agents;
    SceneTokens s;
    Tensor a(na, kAgentFeatures);
    s.agent_mask.assign(na, false);
    for (std::size_t i = 0; i < f.agents.size() && i < na; ++i) {
      std::copy(f.agents[i].begin(), f.agents[i].end(), a.data() + i * kAgentFeatures);
      s.agent_mask[i] = true;
    }
    s.agents = mlp(t, "agent", t.constant(std::move(a)));
    Tensor m(f.map.size(), kMapFeatures);
    for (std::size_t j = 0; j < f.map.size(); ++j) std::copy(f.map[j].begin(), f.map[j].end(), m.data() + j * kMapFeatures);
    s.map = mlp(t, "map", t.constant(std::move(m)));
    s.map_mask.assign(f.map.size(), true);
    return s;
  }

  // Scene-independent part of the trajectory tokens: base + MLP(PE).
  Var trajectory_static(Tape& t) const {
    return diffnum::add(t, p(t, "traj.base"), mlp(t, "traj.pe", t.constant(pe_)));
  }

  Var trajectory_logits(Tape& t, const SceneTokens& s, const std::array<double, kCommandSlots>& cmd,
                        Var traj_static) const {
    require_one_hot(cmd);
    Var c = mlp(t, "traj.cmd", t.constant(Tensor::matrix(1, kCommandSlots, {cmd.begin(), cmd.end()})));
    Var e = diffnum::add(t, traj_static, c);  // row broadcast
    Var ea = cross_attend(t, "traj.agt", e, s.agents, s.agent_mask);
    Var em = cross_attend(t, "traj.map", ea, s.map, s.map_mask);
    Var z = mlp(t, "traj.head", diffnum::concat(t, ea, em));
    return diffnum::slice(t, z, 0, k());
  }

  Var control_logits(Tape& t, const SceneTokens& s) const {
    Var e = p(t, "ctrl.tokens");
    Var ea = cross_attend(t, "ctrl.agt", e, s.agents, s.agent_mask);
    Var em = cross_attend(t, "ctrl.map", ea, s.map, s.map_mask);
    Var z = mlp(t, "ctrl.head", diffnum::concat(t, ea, em));
    return diffnum::slice(t, z, 0, cvocab_.size());
  }

  // `traj_static` may be shared across frames on one tape.
  ForwardVars forward(Tape& t, const SceneFeatures& f, std::optional<Var> traj_static = std::nullopt) const {
    const SceneTokens s = encode_scene(t, f);
    ForwardVars out;
    out.traj_logits = trajectory_logits(t, s, command_one_hot(f.command), traj_static ? *traj_static : trajectory_static(t));
    out.traj_log_dist = diffnum::log_softmax(t, diffnum::log_sigmoid(t, out.traj_logits));
    Var zc = control_logits(t, s);
    out.ctrl_logits = zc;
    for (int g = 0; g < 3; ++g) {
      const auto grp = static_cast<ControlGroup>(g);
      out.ctrl_log_probs[static_cast<std::size_t>(g)] =
          diffnum::log_softmax(t, diffnum::slice(t, zc, cvocab_.offset(grp), cvocab_.group_size(grp)));
    }
    return out;
  }

 private:
  void add_linear(Rng& rng, const std::string& name, const char* group, std::size_t in, std::size_t out,
                  double gain = 1.0) {
    Tensor w(in, out);
    const double sd = gain / std::sqrt(static_cast<double>(in));
    for (auto& v : w.values()) v = sd * rng.normal();
    ps_.add(name + ".w", group, std::move(w));
    ps_.add(name + ".b", group, Tensor(Shape{out}));
  }
  void add_mlp(Rng& rng, const std::string& name, const char* group, std::size_t in, std::size_t out,
               double out_gain = 1.0) {
    add_linear(rng, name + ".l1", group, in, cfg_.hidden);
    add_linear(rng, name + ".l2", group, cfg_.hidden, out, out_gain);
  }
  void add_attention(Rng& rng, const std::string& name, const char* group) {
    const std::size_t c = cfg_.embed;
    for (const char* m : {"q", "k", "v"}) {
      Tensor w(c, c);
      const double sd = 1.0 / std::sqrt(static_cast<double>(c));
      for (auto& v : w.values()) v = sd * rng.normal();
      ps_.add(name + ".w" + m, group, std::move(w));
      ps_.add(name + ".b" + m, group, Tensor(Shape{c}));
    }
  }
  void add_embedding(Rng& rng, const std::string& name, const char* group, std::size_t rows) {
    Tensor e(rows, cfg_.embed);
    for (auto& v : e.values()) v = 0.5 * rng.normal();
    ps_.add(name, group, std::move(e));
  }

  using Shape = diffnum::Shape;

  void init_parameters() {
    Rng rng(mix_seed(cfg_.init_seed, 0x706f6c));
    const std::size_t c = cfg_.embed;
    add_mlp(rng, "agent", kEncoderGroup, kAgentFeatures, c);
    add_mlp(rng, "map", kEncoderGroup, kMapFeatures, c);
    add_embedding(rng, "traj.base", kTrajGroup, k());
    add_mlp(rng, "traj.pe", kTrajGroup, kPeDims, c);
    add_mlp(rng, "traj.cmd", kTrajGroup, kCommandSlots, c);
    add_attention(rng, "traj.agt", kTrajGroup);
    add_attention(rng, "traj.map", kTrajGroup);
    add_mlp(rng, "traj.head", kTrajGroup, 2 * c, 1, cfg_.head_init_scale);
    add_embedding(rng, "ctrl.tokens", kCtrlGroup, cvocab_.size());
    add_attention(rng, "ctrl.agt", kCtrlGroup);
    add_attention(rng, "ctrl.map", kCtrlGroup);
    add_mlp(rng, "ctrl.head", kCtrlGroup, 2 * c, 1, cfg_.head_init_scale);
  }

  PolicyConfig cfg_;
  TrajectoryVocabulary vocab_;
  ControlVocabulary cvocab_;
  Tensor pe_;
  ParameterSet ps_;
};

// Values read off a forward pass.
struct PolicyOutput {
  std::vector<double> traj_scores;  // per-candidate sigmoid
  std::vector<double> traj_dist;    // normalized
  std::array<std::vector<double>, 3> ctrl_dist;
  std::size_t traj_index = 0;
  ControlIndices ctrl_index;
  expert::Trajectory plan{};
  sim::ControlCommand ctrl_command;
};

// Argmax with ties to the lowest index.
inline std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline std::vector<double> softmax_values(const double* x, std::size_t n) {
  std::vector<double> out(n);
  diffnum::detail::softmax_row(x, out.data(), n);
  return out;
}

// Top-1 sampling over every distribution.
inline void sample_top1(PolicyOutput& o, const Policy& p) {
  o.traj_index = argmax(o.traj_scores);
  o.plan = unflatten(p.vocabulary().centers[o.traj_index]);
  const auto& cv = p.control_vocabulary();
  o.ctrl_index = {static_cast<int>(argmax(o.ctrl_dist[0])), static_cast<int>(argmax(o.ctrl_dist[1])),
                  static_cast<int>(argmax(o.ctrl_dist[2]))};
  o.ctrl_command = {cv.throttle[static_cast<std::size_t>(o.ctrl_index.throttle)],
                    cv.brake[static_cast<std::size_t>(o.ctrl_index.brake)],
                    cv.steer[static_cast<std::size_t>(o.ctrl_index.steer)]};
}

// Inference for one frame. A cached scene-independent trajectory tensor can
// be passed to skip recomputing it.
inline PolicyOutput infer(const Policy& p, const SceneFeatures& f, const Tensor* traj_static = nullptr) {
  Tape t;
  std::optional<Var> st;
  if (traj_static) st = t.constant(*traj_static);
  const ForwardVars fv = p.forward(t, f, st);
  PolicyOutput o;
  const Tensor& z = t.value(fv.traj_logits);
  o.traj_scores.resize(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) o.traj_scores[j] = diffnum::sigmoid(z[j]);
  std::vector<double> ls(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) ls[j] = diffnum::log_sigmoid(z[j]);
  o.traj_dist = softmax_values(ls.data(), ls.size());
  const Tensor& zc = t.value(fv.ctrl_logits);
  const auto& cv = p.control_vocabulary();
  for (std::size_t g = 0; g < 3; ++g) {
    const auto grp = static_cast<ControlGroup>(g);
    o.ctrl_dist[g] = softmax_values(zc.data() + cv.offset(grp), cv.group_size(grp));
  }
  sample_top1(o, p);
  return o;
}

inline Tensor trajectory_static_tensor(const Policy& p) {
  Tape t;
  return t.value(p.trajectory_static(t));
}

}  // namespace takead::policy

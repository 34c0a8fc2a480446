// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `acceptance 3 9` runs a subset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "support/finite_diff.hpp"
#include "support/fixtures.hpp"
#include "takead/train/post_optimize.hpp"

using namespace takead;
using diffnum::Tape;
using diffnum::Tensor;
using diffnum::Var;

namespace {

// Closed form -ln sigma(-(beta ln 0.2 - beta ln 0.5) - gamma) + ln sigma(-gamma),
// evaluated with mpmath at 30 digits.
constexpr double kPo_02_05 = 0.0491482636;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1. preference loss ----

Outcome loss_correctness() {
  auto po = [](const std::vector<double>& probs, std::size_t expert, diffnum::Gradients* g = nullptr) {
    diffnum::ParameterSet ps;
    Tensor z(diffnum::Shape{probs.size()});
    for (std::size_t i = 0; i < probs.size(); ++i) z[i] = std::log(probs[i]);
    ps.add("z", "g", z);
    Tape t;
    auto r = train::po_loss(t, diffnum::log_softmax(t, t.param(ps, "z")), expert, 0.1, 0.1);
    if (g) *g = t.backward(r.loss);
    return t.value(r.loss)[0];
  };
  const double closed = po({0.2, 0.5, 0.3}, 0);
  diffnum::Gradients g;
  const double at_argmax = po({0.2, 0.5, 0.3}, 1, &g);
  double gmax = 0.0;
  for (std::size_t i = 0; i < g[0].size(); ++i) gmax = std::max(gmax, std::abs(g[0][i]));

  Rng rng(42);
  double min_loss = 1.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + rng.below(63);
    std::vector<double> z(n);
    for (auto& x : z) x = 4.0 * rng.normal();
    diffnum::ParameterSet ps;
    ps.add("z", "g", Tensor::vector(z));
    Tape t;
    auto r = train::po_loss(t, diffnum::log_softmax(t, t.param(ps, "z")), rng.below(n), 0.1, 0.1);
    min_loss = std::min(min_loss, t.value(r.loss)[0]);
  }
  const bool pass = std::abs(closed - kPo_02_05) <= 1e-6 && at_argmax == 0.0 && gmax == 0.0 && min_loss >= 0.0;
  return {pass, fmt("po(0.2,0.5)=%.10f oracle %.10f (tol 1e-6); at argmax loss %g |grad|max %g; min over 10000 draws %.3g",
                    closed, kPo_02_05, at_argmax, gmax, min_loss)};
}

// ---- 2. gradient suite ----

using LossBuilder = std::function<Var(Tape&, const policy::Policy&, const data::DemoSample&)>;

double grad_check(const LossBuilder& build, std::uint64_t seed) {
  const auto cfg = fixture::small_config(seed);
  policy::Policy p(cfg, fixture::random_vocab(5, seed));
  Rng rng(seed);
  for (auto& prm : p.params())
    for (auto& x : prm.value.values()) x += 0.3 * rng.normal();
  const auto samples = fixture::random_samples(3, seed + 17, cfg);
  auto total = [&](Tape& t) {
    Var sum;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Var l = build(t, p, samples[i]);
      sum = i == 0 ? l : diffnum::add(t, sum, l);
    }
    return diffnum::scale(t, sum, 1.0 / static_cast<double>(samples.size()));
  };
  Tape t;
  const auto g = t.backward(total(t));
  return oracle::check_gradients(p.params(), g, [&] {
           Tape u;
           return u.value(total(u))[0];
         }).max_rel_error;
}

Outcome gradient_suite() {
  const std::vector<std::pair<std::string, LossBuilder>> losses{
      {"traj_kl",
       [](Tape& t, const policy::Policy& p, const data::DemoSample& s) {
         return train::traj_kl(t, p.forward(t, s.features), s, p.vocabulary(), 1.0);
       }},
      {"ctrl_kl",
       [](Tape& t, const policy::Policy& p, const data::DemoSample& s) {
         return train::ctrl_kl(t, p.forward(t, s.features), s, p.control_vocabulary());
       }},
      {"dagger",
       [](Tape& t, const policy::Policy& p, const data::DemoSample& s) {
         return train::sample_loss(t, train::Objective::Joint, p, p.forward(t, s.features), s, 0.1, 0.1, 1.0);
       }},
      {"simpo",
       [](Tape& t, const policy::Policy& p, const data::DemoSample& s) {
         const auto fv = p.forward(t, s.features);
         const auto y = policy::argmax(train::soft_target(s.expert_traj, p.vocabulary(), 1.0));
         Var l = train::simpo_loss(t, fv.traj_log_dist, y, 0.1, 0.1).loss;
         for (std::size_t g = 0; g < 3; ++g)
           l = diffnum::add(t, l,
                            train::simpo_loss(t, fv.ctrl_log_probs[g],
                                              static_cast<std::size_t>(s.ctrl[static_cast<policy::ControlGroup>(g)]),
                                              0.1, 0.1)
                                .loss);
         return l;
       }},
      {"po",
       [](Tape& t, const policy::Policy& p, const data::DemoSample& s) {
         return train::sample_loss(t, train::Objective::Preference, p, p.forward(t, s.features), s, 0.1, 0.1, 1.0);
       }},
  };
  bool pass = true;
  std::string detail = "max rel err over 10 seeds (tol 1e-4):";
  for (const auto& [name, build] : losses) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) worst = std::max(worst, grad_check(build, seed));
    pass = pass && worst < 1e-4;
    detail += fmt(" %s %.2e", name.c_str(), worst);
  }
  return {pass, detail};
}

// ---- 3. ensemble ----

Outcome ensemble_exactness() {
  Rng rng(3);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const sim::ControlCommand a{rng.uniform(), rng.uniform() < 0.5 ? 0.0 : 1.0, rng.uniform(-1, 1)};
    const sim::ControlCommand b{rng.uniform(), rng.uniform() < 0.5 ? 0.0 : 1.0, rng.uniform(-1, 1)};
    const auto e = policy::ensemble(a, b);
    if (e.throttle != (a.throttle + b.throttle) / 2.0 || e.steer != (a.steer + b.steer) / 2.0 ||
        e.brake != (a.brake > b.brake ? a.brake : b.brake))
      ++bad;
  }
  return {bad == 0, fmt("%d of 1000 cases differ from mean/max", bad)};
}

// ---- 4. takeover pipeline ----

Outcome takeover_pipeline() {
  const auto spec = sim::make_scenario(sim::ScenarioKind::EmergencyBrake, data::kTrainSeedBase);
  // Follows the lane at full throttle straight into the braking lead.
  policy::FunctionDriver ram([](const sim::World& w) {
    auto c = expert::expert_control(w);
    return sim::ControlCommand{1.0, 0.0, c.steer};
  });
  const auto ep = data::shadow_episode(spec, ram, {});
  double first_collision = -1.0;
  for (const auto& e : ep.infractions)
    if (sim::is_collision(e.kind)) {
      first_collision = e.time;
      break;
    }
  const data::TakeoverSegment* seg = nullptr;
  for (const auto& s : ep.segments)
    if (s.trigger == data::TriggerKind::Collision) {
      seg = &s;
      break;
    }
  bool frames_ok = seg && seg->frames.size() == 40;
  if (frames_ok)
    for (std::size_t i = 0; i < 40; ++i)
      frames_ok = frames_ok && std::abs(seg->frames[i].sample.time - (seg->start_time() + sim::kDt * static_cast<double>(i))) < 1e-9;
  const bool before = seg && first_collision > 0.0 && seg->start_time() < first_collision;

  std::size_t threshold = 0;
  for (const auto& s : sim::make_suite(data::seed_range(data::kTrainSeedBase, 5))) {
    policy::ExpertDriver clone;
    for (const auto& g : data::shadow_episode(s, clone, {}).segments)
      threshold += g.trigger == data::TriggerKind::Threshold ? 1 : 0;
  }
  return {frames_ok && before && threshold == 0,
          fmt("collision trigger at t=%.2f, first impact at t=%.2f; segment %zu frames at dt %.2f; "
              "expert clone threshold triggers %zu over 25 episodes",
              seg ? seg->start_time() : -1.0, first_collision, seg ? seg->frames.size() : 0, sim::kDt, threshold)};
}

// ---- 5. expert gate ----

Outcome expert_gate() {
  const auto suite = sim::make_suite(data::seed_range(data::kTestSeedBase, 5));
  const auto s = bench::summarize(bench::evaluate_suite([] { return std::make_unique<policy::ExpertDriver>(); }, suite));
  std::size_t collisions = 0;
  for (const auto& r : s.results)
    for (const auto& e : r.infractions) collisions += sim::is_collision(e.kind) ? 1 : 0;
  return {s.mean_ds >= 90.0 && collisions == 0,
          fmt("%zu episodes, DS %.2f (>= 90), SR %.1f, collisions %zu", s.episodes, s.mean_ds, s.sr, collisions)};
}

// ---- 6. end-to-end post-optimization ----

// Desk-scale settings for the directional check.
struct EndToEnd {
  std::size_t demo_seeds = 4;
  std::size_t collect_seeds = 8;
  std::size_t validation_seeds = 4;
  std::size_t vocab_k = 64;
  int demo_stride = 2;
  train::TrainConfig train = [] {
    train::TrainConfig c;
    c.pretrain_epochs = 2;
    c.pretrain_lr = 1e-3;
    c.dagger_lr = 3e-4;
    c.dagger_epochs = 2;
    c.rounds = 2;
    return c;
  }();
};

Outcome end_to_end(int jobs) {
  const EndToEnd e;
  data::DemoConfig dc;
  dc.stride = e.demo_stride;
  dc.jobs = jobs;
  const auto demos = data::collect_demos(sim::make_suite(data::seed_range(data::kTrainSeedBase, e.demo_seeds)), dc);
  std::vector<policy::TrajVec> trajs;
  for (const auto& s : demos.samples) trajs.push_back(s.expert_traj);
  policy::Policy p({}, policy::build_vocabulary(trajs, e.vocab_k, 7));
  train::pretrain(p, demos.samples, e.train);

  train::PostOptConfig pc;
  pc.train = e.train;
  pc.jobs = jobs;
  pc.collect_suite = sim::make_suite(data::seed_range(data::kTrainSeedBase, e.collect_seeds));
  pc.validation_suite = sim::make_suite(data::seed_range(data::kValidationSeedBase, e.validation_seeds));
  const auto before = *train::validate_policy(p, pc);
  const auto rounds = train::post_optimize(p, demos.samples, pc);
  const auto& after = *rounds.back().validation;

  bool margins = true;
  std::string trend;
  for (const auto& r : rounds) {
    margins = margins && !r.po_skipped && r.po.margin_after > r.po.margin_before;
    trend += fmt("; round %d DS %.2f SR %.1f margin %.4f->%.4f", r.round, r.validation->mean_ds, r.validation->sr,
                 r.po.margin_before, r.po.margin_after);
  }
  const double gain = after.mean_ds - before.mean_ds;
  return {rounds.size() == 2 && gain >= 5.0 && after.sr >= before.sr && margins,
          fmt("%zu validation episodes; pretrained DS %.2f SR %.1f", before.episodes, before.mean_ds, before.sr) + trend +
              fmt("; DS gain %+.2f (>= 5)", gain)};
}

// ---- 7. safety creep ----

// Imitation inertia: drives like the expert, but once it has slowed below
// kStall it keeps braking until something else gets it moving again. Creep
// is layered on exactly as in PolicyDriver.
class InertiaDriver : public policy::Driver {
 public:
  static constexpr double kStall = 0.6;  // m/s
  explicit InertiaDriver(policy::CreepConfig c) : creep_(c) {}
  void begin_episode(const sim::World&) override { creep_.reset(); }
  sim::ControlCommand act(const sim::World& w) override {
    sim::ControlCommand c = expert::expert_control(w);
    if (w.ego.speed < kStall) c = {0.0, 1.0, c.steer};
    const auto over = creep_.update(w, c);
    return over ? *over : c;
  }

 private:
  policy::SafetyCreep creep_;
};

Outcome safety_creep() {
  // Leads that stop, hold and drive off, and crossing traffic that passes:
  // the ego is brought nearly to rest and the road then clears.
  const auto suite = sim::make_suite(data::seed_range(data::kValidationSeedBase, 10),
                                     {sim::ScenarioKind::EmergencyBrake, sim::ScenarioKind::GiveWay});
  auto run = [&](bool enabled) {
    policy::CreepConfig c;
    c.enabled = enabled;
    return bench::summarize(bench::evaluate_suite([c] { return std::make_unique<InertiaDriver>(c); }, suite));
  };
  const auto off = run(false), on = run(true);
  return {on.timeout_rate < off.timeout_rate,
          fmt("%zu episodes; timeout rate off %.1f%% on %.1f%%; DS off %.2f on %.2f", off.episodes, off.timeout_rate,
              on.timeout_rate, off.mean_ds, on.mean_ds)};
}

// ---- 8. determinism ----

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool run_pipeline(const std::filesystem::path& dir, const std::string& extra) {
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  for (const char* c : {"collect-demos", "build-vocab", "pretrain", "postopt", "eval"}) {
    const std::string cmd = "cd '" + dir.string() + "' && '" TAKEAD_CLI_PATH "' -c '" TAKEAD_SMOKE_CONFIG "' " + extra +
                            " " + c + " > log.txt 2>&1";
    if (std::system(cmd.c_str()) != 0) return false;
  }
  return true;
}

Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "takead_acceptance";
  const std::vector<std::pair<std::string, std::string>> runs{{"a", "--jobs 1"}, {"b", "--jobs 1"}, {"c", "--jobs 4"}};
  for (const auto& [name, extra] : runs)
    if (!run_pipeline(root / name, extra)) return {false, "pipeline run " + name + " failed, see " + (root / name / "log.txt").string()};
  const std::vector<std::string> files{"artifacts/pretrained.ckpt", "artifacts/final.ckpt",
                                       "artifacts/postopt/round_1/policy.ckpt", "artifacts/reports/eval_test.json",
                                       "artifacts/reports/postopt.json", "artifacts/demos.ndjson", "artifacts/vocab.ndjson"};
  std::size_t differ = 0;
  std::string which;
  for (const auto& f : files) {
    const auto a = slurp(root / "a" / f);
    for (const char* other : {"b", "c"})
      if (a.empty() || a != slurp(root / other / f)) ++differ, which += " " + std::string(other) + ":" + f;
  }
  std::filesystem::remove_all(root);
  return {differ == 0, fmt("%zu files compared across 3 runs (jobs 1, 1, 4); %zu differ", files.size(), differ) + which};
}

// ---- 9. k-means ----

Outcome kmeans_properties() {
  std::size_t increases = 0, iterations = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<policy::TrajVec> data(400);
    for (auto& t : data)
      for (double& x : t) x = rng.normal() * 3.0 + (rng.uniform() < 0.5 ? 5.0 : -5.0);
    const auto r = policy::kmeans(data, 16, seed);
    iterations += r.cost_history.size();
    for (std::size_t i = 1; i < r.cost_history.size(); ++i)
      increases += r.cost_history[i] > r.cost_history[i - 1] * (1.0 + 1e-12) ? 1 : 0;
  }
  Rng rng(11);
  std::vector<policy::TrajVec> data(50);
  policy::TrajVec mean{};
  for (auto& t : data)
    for (std::size_t d = 0; d < policy::kTrajDims; ++d) {
      t[d] = rng.normal() * 5.0;
      mean[d] += t[d] / 50.0;
    }
  const auto v = policy::build_vocabulary(data, 1, 3);
  double err = 0.0;
  for (std::size_t d = 0; d < policy::kTrajDims; ++d) err = std::max(err, std::abs(v.centers[0][d] - mean[d]));
  return {increases == 0 && err <= 1e-9,
          fmt("%zu cost increases over %zu iterations (10 seeds); k=1 center vs mean max err %.2e (tol 1e-9)", increases,
              iterations, err)};
}

}  // namespace

int main(int argc, char** argv) {
  const int jobs = 1;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"loss correctness", loss_correctness},
      {"gradient suite", gradient_suite},
      {"ensemble exactness", ensemble_exactness},
      {"takeover pipeline", takeover_pipeline},
      {"expert quality gate", expert_gate},
      {"end-to-end post-optimization", [] { return end_to_end(jobs); }},
      {"safety creep", safety_creep},
      {"determinism", determinism},
      {"k-means properties", kmeans_properties},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << n << ". " << criteria[i].first << " (" << fmt("%.1f", secs)
              << " s): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>

#include "takead/bench/bench.hpp"
#include "takead/data/collect.hpp"
#include "takead/policy/io.hpp"
#include "takead/train/trainer.hpp"

namespace takead::train {

using json = nlohmann::json;

struct PostOptConfig {
  TrainConfig train;
  data::ShadowConfig shadow;
  policy::CreepConfig creep;
  policy::PidConfig pid;
  std::vector<sim::ScenarioSpec> collect_suite;     // training scenarios
  std::vector<sim::ScenarioSpec> validation_suite;  // may be empty
  int jobs = 1;
  std::string out_dir;  // round_<i>/ artifacts when non-empty
};

struct RoundReport {
  int round = 0;
  std::size_t takeover_samples = 0;
  std::size_t collision_segments = 0;
  std::size_t threshold_segments = 0;
  data::FilterStats filter;
  std::size_t dagger_samples = 0;
  PhaseReport dagger;
  PoReport po;
  bool po_skipped = false;
  std::optional<bench::SuiteReport> validation;
  std::string checkpoint_hash;
};

inline json to_json(const PhaseReport& p) {
  return {{"name", p.name}, {"epoch_loss", p.epoch_loss}, {"steps", p.steps}};
}

inline json to_json(const RoundReport& r) {
  json j = {{"round", r.round},
            {"takeover_samples", r.takeover_samples},
            {"segments", {{"collision", r.collision_segments}, {"threshold", r.threshold_segments}}},
            {"filter", data::to_json(r.filter)},
            {"dagger_samples", r.dagger_samples},
            {"dagger", to_json(r.dagger)},
            {"po_skipped", r.po_skipped},
            {"po",
             {{"phase", to_json(r.po.phase)},
              {"margin_before", r.po.margin_before},
              {"margin_after", r.po.margin_after},
              {"loss_before", r.po.loss_before},
              {"loss_after", r.po.loss_after}}},
            {"checkpoint_hash", r.checkpoint_hash}};
  if (r.validation) j["validation"] = bench::to_json(*r.validation);
  return j;
}

inline std::string round_table(const std::vector<RoundReport>& rounds) {
  std::ostringstream os;
  os << std::left << std::setw(7) << "round" << std::setw(10) << "takeover" << std::setw(11) << "collision"
     << std::setw(11) << "threshold" << std::setw(12) << "dagger" << std::setw(19) << "margin" << std::setw(9)
     << "DS" << "SR\n";
  for (const auto& r : rounds) {
    const double dl = r.dagger.epoch_loss.empty() ? 0.0 : r.dagger.epoch_loss.back();
    os << std::left << std::setw(7) << r.round << std::setw(10) << r.takeover_samples << std::setw(11)
       << r.collision_segments << std::setw(11) << r.threshold_segments << std::setw(12) << bench::fixed(dl, 4)
       << std::setw(19)
       << (r.po_skipped ? std::string("skipped") : bench::fixed(r.po.margin_before, 4) + " > " + bench::fixed(r.po.margin_after, 4))
       << std::setw(9) << (r.validation ? bench::fixed(r.validation->mean_ds) : "-")
       << (r.validation ? bench::fixed(r.validation->sr) : "-") << '\n';
  }
  return os.str();
}

inline std::optional<bench::SuiteReport> validate_policy(const policy::Policy& p, const PostOptConfig& cfg) {
  if (cfg.validation_suite.empty()) return std::nullopt;
  const auto res = bench::evaluate_suite(bench::policy_factory(p, cfg.creep, cfg.pid), cfg.validation_suite, cfg.jobs);
  return bench::summarize(res, "", hex64(policy::policy_hash(p)));
}

// Multi-round loop: collect takeovers with the current policy, merge with
// all earlier rounds and the demonstrations, DAgger, then preference epochs
// on this round's takeovers. Checkpoints after every round.
inline std::vector<RoundReport> post_optimize(policy::Policy& p, const std::vector<data::DemoSample>& demos,
                                              const PostOptConfig& cfg,
                                              const std::function<void(const RoundReport&)>& on_round = {}) {
  cfg.train.validate();
  data::require_training_suite(cfg.collect_suite, "post_optimize");
  const std::uint64_t vh = p.vocabulary().hash();
  std::vector<data::Dataset<data::TakeoverSample>> rounds;
  std::vector<RoundReport> reports;
  for (int i = 1; i <= cfg.train.rounds; ++i) {
    RoundReport rep;
    rep.round = i;
    data::ShadowConfig sc = cfg.shadow;
    sc.round = i;
    sc.jobs = cfg.jobs;
    const auto col = data::run_shadow_collection(cfg.collect_suite, bench::policy_factory(p, cfg.creep, cfg.pid), sc, vh);
    rep.takeover_samples = col.dataset.samples.size();
    rep.collision_segments = col.count(data::TriggerKind::Collision);
    rep.threshold_segments = col.count(data::TriggerKind::Threshold);
    rep.filter = col.filtered.stats;
    rounds.push_back(col.dataset);

    const auto merged = data::merge_dagger_dataset(demos, rounds, vh, cfg.train.takeover_weight);
    rep.dagger_samples = merged.samples.size();
    rep.dagger = dagger_epoch(p, merged, cfg.train, mix_seed(cfg.train.seed, 1000 + static_cast<std::uint64_t>(i)));

    std::vector<data::DemoSample> current;
    for (const auto& s : col.dataset.samples) current.push_back(s.sample);
    if (current.empty()) {
      rep.po_skipped = true;
    } else {
      rep.po = po_epoch(p, current, cfg.train, mix_seed(cfg.train.seed, 2000 + static_cast<std::uint64_t>(i)));
    }
    rep.validation = validate_policy(p, cfg);
    rep.checkpoint_hash = hex64(policy::policy_hash(p));

    if (!cfg.out_dir.empty()) {
      const auto dir = std::filesystem::path(cfg.out_dir) / ("round_" + std::to_string(i));
      std::filesystem::create_directories(dir);
      policy::save_policy((dir / "policy.ckpt").string(), p);
      auto m = col.dataset.manifest;
      m.sources = {(dir / "takeover.ndjson").string()};
      data::persist((dir / "takeover.ndjson").string(), m, col.dataset.samples);
      std::ofstream((dir / "report.json").string()) << to_json(rep).dump(2) << '\n';
    }
    if (on_round) on_round(rep);
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace takead::train

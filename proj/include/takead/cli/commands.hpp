#pragma once

// Pipeline commands behind the takead tool. Each command reads its inputs
// from the paths in RunConfig, writes its artifact plus a sidecar
// "<artifact>.meta.json" (producing command, config hash, input hashes).

#include <filesystem>
#include <iostream>
#include <map>

#include "takead/cli/config.hpp"
#include "takead/train/post_optimize.hpp"

namespace takead::cli {

namespace fs = std::filesystem;

inline std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string file_hash(const std::string& path) {
  const std::string b = read_bytes(path);
  return hex64(fnv1a(b.data(), b.size()));
}

inline void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

inline void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

inline std::string meta_path(const std::string& artifact) { return artifact + ".meta.json"; }

inline void write_meta(const std::string& artifact, const std::string& command, const RunConfig& cfg,
                       const std::vector<std::string>& inputs) {
  json in = json::object();
  for (const auto& p : inputs) in[p] = file_hash(p);
  const json m = {{"artifact", artifact},
                  {"command", command},
                  {"config_hash", config_hash(cfg)},
                  {"seed", cfg.seed},
                  {"hash", file_hash(artifact)},
                  {"inputs", in}};
  write_text(meta_path(artifact), m.dump(2) + "\n");
}

// Missing prerequisite: names the path and the command that produces it.
inline void require(const std::string& path, const std::string& producer) {
  if (!fs::exists(path))
    throw ValidationError("missing " + path + " (produced by `takead " + producer + "`)");
}

inline policy::Policy load_checkpoint(const RunConfig& cfg, const std::string& path,
                                      const policy::TrajectoryVocabulary& vocab) {
  return policy::load_policy(path, vocab, cfg.policy_config(), cfg.control_vocab);
}

inline data::DemoConfig demo_config(const RunConfig& cfg) {
  data::DemoConfig d;
  d.expert = cfg.expert;
  d.scene = cfg.policy.scene;
  d.cvocab = cfg.control_vocab;
  d.stride = cfg.demo_stride;
  d.jobs = cfg.jobs;
  return d;
}

inline data::ShadowConfig shadow_config(const RunConfig& cfg) {
  auto s = cfg.shadow;
  s.expert = cfg.expert;
  s.scene = cfg.policy.scene;
  s.cvocab = cfg.control_vocab;
  s.jobs = cfg.jobs;
  return s;
}

inline void collect_demos(const RunConfig& cfg, std::ostream& out) {
  const auto c = data::collect_demos(cfg.train.specs(), demo_config(cfg));
  data::DatasetManifest m;
  m.kind = "demo";
  m.round_counts[0] = c.samples.size();
  ensure_parent(cfg.paths.demos);
  data::persist(cfg.paths.demos, m, c.samples);
  write_meta(cfg.paths.demos, "collect-demos", cfg, {});
  out << "collect-demos: " << c.samples.size() << " samples from " << c.episodes - c.discarded.size() << "/"
      << c.episodes << " episodes -> " << cfg.paths.demos << '\n';
}

inline void build_vocab(const RunConfig& cfg, std::ostream& out) {
  require(cfg.paths.demos, "collect-demos");
  const auto demos = data::load_demos(cfg.paths.demos).samples;
  std::vector<policy::TrajVec> trajs;
  trajs.reserve(demos.size());
  for (const auto& s : demos) trajs.push_back(s.expert_traj);
  if (trajs.size() < cfg.vocab_k)
    throw ValidationError("build-vocab: " + std::to_string(trajs.size()) + " demonstrations for k = " +
                          std::to_string(cfg.vocab_k));
  const auto v = policy::build_vocabulary(trajs, cfg.vocab_k, cfg.vocab_seed());
  ensure_parent(cfg.paths.vocab);
  policy::save_vocabulary(cfg.paths.vocab, v);
  write_meta(cfg.paths.vocab, "build-vocab", cfg, {cfg.paths.demos});
  out << "build-vocab: k = " << v.size() << " hash " << hex64(v.hash()) << " -> " << cfg.paths.vocab << '\n';
}

inline void pretrain(const RunConfig& cfg, std::ostream& out) {
  require(cfg.paths.demos, "collect-demos");
  require(cfg.paths.vocab, "build-vocab");
  const auto vocab = policy::load_vocabulary(cfg.paths.vocab);
  const auto demos = data::load_demos(cfg.paths.demos).samples;
  policy::Policy p(cfg.policy_config(), vocab, cfg.control_vocab);
  const auto rep = train::pretrain(p, demos, cfg.train_config());
  ensure_parent(cfg.paths.pretrained);
  policy::save_policy(cfg.paths.pretrained, p);
  write_meta(cfg.paths.pretrained, "pretrain", cfg, {cfg.paths.demos, cfg.paths.vocab});
  json stages = json::array();
  for (const auto& s : rep.stages) stages.push_back(train::to_json(s));
  const std::string report = (fs::path(cfg.paths.reports) / "pretrain.json").string();
  write_text(report, json{{"config_hash", config_hash(cfg)},
                          {"checkpoint_hash", hex64(policy::policy_hash(p))},
                          {"traj_loss", {rep.initial_traj, rep.final_traj}},
                          {"ctrl_loss", {rep.initial_ctrl, rep.final_ctrl}},
                          {"stages", stages}}
                         .dump(2) +
                         "\n");
  write_meta(report, "pretrain", cfg, {cfg.paths.demos, cfg.paths.vocab});
  out << "pretrain: L_traj " << bench::fixed(rep.initial_traj, 4) << " -> " << bench::fixed(rep.final_traj, 4)
      << ", L_ctrl " << bench::fixed(rep.initial_ctrl, 4) << " -> " << bench::fixed(rep.final_ctrl, 4) << " -> "
      << cfg.paths.pretrained << '\n';
}

inline std::string takeover_path(const RunConfig& cfg, int round) {
  return (fs::path(cfg.paths.takeover_dir) / ("round_" + std::to_string(round) + ".ndjson")).string();
}

inline void collect_takeover(const RunConfig& cfg, int round, std::string checkpoint, std::ostream& out) {
  if (round < 1) throw ValidationError("collect-takeover: --round must be >= 1");
  const bool explicit_ckpt = !checkpoint.empty();
  if (!explicit_ckpt) checkpoint = cfg.paths.pretrained;
  require(checkpoint, explicit_ckpt ? "pretrain or postopt" : "pretrain");
  require(cfg.paths.vocab, "build-vocab");
  const auto vocab = policy::load_vocabulary(cfg.paths.vocab);
  const auto p = load_checkpoint(cfg, checkpoint, vocab);
  auto sc = shadow_config(cfg);
  sc.round = round;
  const auto col = data::run_shadow_collection(cfg.collect_specs(), bench::policy_factory(p, cfg.creep, cfg.pid), sc,
                                               vocab.hash());
  const auto path = takeover_path(cfg, round);
  ensure_parent(path);
  data::persist(path, col.dataset.manifest, col.dataset.samples);
  write_meta(path, "collect-takeover", cfg, {cfg.paths.vocab, checkpoint});
  out << "collect-takeover: round " << round << ", " << col.filtered.kept.size() << " segments ("
      << col.count(data::TriggerKind::Collision) << " collision, " << col.count(data::TriggerKind::Threshold)
      << " threshold), " << col.filtered.stats.discarded() << " filtered, " << col.dataset.samples.size()
      << " samples -> " << path << '\n';
}

inline void postopt(const RunConfig& cfg, std::string checkpoint, std::ostream& out) {
  if (checkpoint.empty()) checkpoint = cfg.paths.pretrained;
  require(cfg.paths.demos, "collect-demos");
  require(cfg.paths.vocab, "build-vocab");
  require(checkpoint, "pretrain");
  const auto vocab = policy::load_vocabulary(cfg.paths.vocab);
  const auto demos = data::load_demos(cfg.paths.demos).samples;
  auto p = load_checkpoint(cfg, checkpoint, vocab);
  const std::string input_hash = file_hash(checkpoint);

  train::PostOptConfig pc;
  pc.train = cfg.train_config();
  pc.shadow = shadow_config(cfg);
  pc.creep = cfg.creep;
  pc.pid = cfg.pid;
  pc.collect_suite = cfg.collect_specs();
  pc.validation_suite = cfg.validation.specs();
  pc.jobs = cfg.jobs;
  pc.out_dir = cfg.paths.postopt_dir;

  std::vector<std::pair<int, bench::SuiteReport>> trend;
  if (auto v0 = train::validate_policy(p, pc)) trend.emplace_back(0, *v0);
  const std::vector<std::string> inputs{cfg.paths.demos, cfg.paths.vocab, checkpoint};
  const auto rounds = train::post_optimize(p, demos, pc, [&](const train::RoundReport& r) {
    const auto dir = fs::path(cfg.paths.postopt_dir) / ("round_" + std::to_string(r.round));
    for (const char* f : {"policy.ckpt", "takeover.ndjson", "report.json"})
      write_meta((dir / f).string(), "postopt", cfg, inputs);
    if (r.validation) trend.emplace_back(r.round, *r.validation);
    out << "postopt: round " << r.round << " takeover " << r.takeover_samples << " DS "
        << (r.validation ? bench::fixed(r.validation->mean_ds) : "-") << '\n'
        << std::flush;
  });
  ensure_parent(cfg.paths.final_checkpoint);
  policy::save_policy(cfg.paths.final_checkpoint, p);
  write_meta(cfg.paths.final_checkpoint, "postopt", cfg, inputs);

  json rj = json::array();
  for (const auto& r : rounds) rj.push_back(train::to_json(r));
  json tj = json::array();
  for (const auto& [i, s] : trend) tj.push_back({{"round", i}, {"ds", s.mean_ds}, {"sr", s.sr}});
  const std::string report = (fs::path(cfg.paths.reports) / "postopt.json").string();
  write_text(report, json{{"config_hash", config_hash(cfg)},
                          {"input_checkpoint", input_hash},
                          {"final_checkpoint", hex64(policy::policy_hash(p))},
                          {"trend", tj},
                          {"rounds", rj}}
                         .dump(2) +
                         "\n");
  write_meta(report, "postopt", cfg, inputs);
  const std::string csv = (fs::path(cfg.paths.reports) / "trend.csv").string();
  write_text(csv, bench::trend_csv(trend));
  write_meta(csv, "postopt", cfg, inputs);
  if (!rounds.empty()) out << train::round_table(rounds);
  out << "postopt: " << rounds.size() << " rounds -> " << cfg.paths.final_checkpoint << '\n';
}

inline void eval(const RunConfig& cfg, const std::string& suite_name, std::string checkpoint,
                 const std::string& trace_dir, std::ostream& out) {
  const SuiteSelection* sel = suite_name == "test"         ? &cfg.test
                              : suite_name == "validation" ? &cfg.validation
                                                           : nullptr;
  if (!sel) throw ValidationError("eval: --suite must be test or validation (got '" + suite_name + "')");
  std::set<std::uint64_t> train(cfg.train.seeds.begin(), cfg.train.seeds.end());
  if (cfg.collect) train.insert(cfg.collect->seeds.begin(), cfg.collect->seeds.end());
  for (auto s : sel->seeds)
    if (train.count(s)) throw ValidationError("eval: seed " + std::to_string(s) + " belongs to the training suite");
  const bool explicit_ckpt = !checkpoint.empty();
  if (!explicit_ckpt) checkpoint = cfg.paths.final_checkpoint;
  require(checkpoint, explicit_ckpt ? "pretrain or postopt" : "postopt");
  require(cfg.paths.vocab, "build-vocab");
  const auto vocab = policy::load_vocabulary(cfg.paths.vocab);
  const auto p = load_checkpoint(cfg, checkpoint, vocab);
  const auto specs = sel->specs();
  bench::RunOptions ro;
  ro.keep_trace = !trace_dir.empty();
  const auto res = bench::evaluate_suite(bench::policy_factory(p, cfg.creep, cfg.pid), specs, cfg.jobs, ro);
  if (!trace_dir.empty()) {
    fs::create_directories(trace_dir);
    for (const auto& r : res) sim::write_trace((fs::path(trace_dir) / (r.scenario_id + ".ndjson")).string(), r.trace);
  }
  const auto s = bench::summarize(res, config_hash(cfg), hex64(policy::policy_hash(p)));
  const std::string report = (fs::path(cfg.paths.reports) / ("eval_" + suite_name + ".json")).string();
  write_text(report, bench::to_json(s).dump(2) + "\n");
  write_meta(report, "eval", cfg, {cfg.paths.vocab, checkpoint});
  out << bench::table(s) << "report -> " << report << '\n';
}

// Lists every artifact the config names, with the config hash that produced
// it and whether its recorded inputs still match the files on disk.
inline void report(const RunConfig& cfg, std::ostream& out) {
  std::vector<std::string> paths{cfg.paths.demos, cfg.paths.vocab, cfg.paths.pretrained, cfg.paths.final_checkpoint};
  auto add_dir = [&](const std::string& dir, bool recursive) {
    if (!fs::is_directory(dir)) return;
    std::vector<std::string> found;
    auto visit = [&](const fs::directory_entry& e) {
      const auto p = e.path().string();
      if (e.is_regular_file() && !p.ends_with(".meta.json")) found.push_back(p);
    };
    if (recursive) {
      for (const auto& e : fs::recursive_directory_iterator(dir)) visit(e);
    } else {
      for (const auto& e : fs::directory_iterator(dir)) visit(e);
    }
    std::sort(found.begin(), found.end());
    paths.insert(paths.end(), found.begin(), found.end());
  };
  add_dir(cfg.paths.takeover_dir, false);
  add_dir(cfg.paths.postopt_dir, true);
  add_dir(cfg.paths.reports, false);

  out << "config " << config_hash(cfg) << " (seed " << cfg.seed << ")\n";
  out << std::left << std::setw(48) << "artifact" << std::setw(18) << "command" << std::setw(18) << "config"
      << "status\n";
  for (const auto& p : paths) {
    if (!fs::exists(p)) {
      out << std::left << std::setw(48) << p << std::setw(18) << "-" << std::setw(18) << "-" << "missing\n";
      continue;
    }
    std::string command = "-", hash = "-", status = "no metadata";
    if (fs::exists(meta_path(p))) {
      const json m = json::parse(read_bytes(meta_path(p)));
      command = m.value("command", "-");
      hash = m.value("config_hash", "-");
      status = m.value("hash", "") == file_hash(p) ? "ok" : "modified";
      if (status == "ok")
        for (const auto& [in, h] : m.at("inputs").items())
          if (!fs::exists(in) || file_hash(in) != h.get<std::string>()) status = "stale (" + in + ")";
    }
    out << std::left << std::setw(48) << p << std::setw(18) << command << std::setw(18) << hash << status << '\n';
  }
  const auto pj = (fs::path(cfg.paths.reports) / "postopt.json").string();
  if (fs::exists(pj)) {
    out << "\nround  DS       SR\n";
    const json post = json::parse(read_bytes(pj));
    for (const auto& t : post.at("trend"))
      out << std::left << std::setw(7) << t.at("round").get<int>() << std::setw(9)
          << bench::fixed(t.at("ds").get<double>()) << bench::fixed(t.at("sr").get<double>()) << '\n';
  }
}

}  // namespace takead::cli

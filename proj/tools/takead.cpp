// takead: command-line driver for the desk-scale pipeline.
//
//   takead collect-demos     expert demonstrations on the train suite
//   takead build-vocab       k-means trajectory vocabulary from the demos
//   takead pretrain          three-stage imitation pretraining
//   takead collect-takeover  one round of shadow-mode takeover collection
//   takead postopt           DAgger + preference rounds (collects internally)
//   takead eval              closed-loop evaluation on validation or test
//   takead report            artifacts, their config hashes, round trend
//
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <CLI11.hpp>

#include "takead/cli/commands.hpp"

using namespace takead;

int main(int argc, char** argv) {
  CLI::App app{"TakeAD desk-scale closed-loop driving lab"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  app.add_option("-c,--config", config_path, "JSON run config (defaults apply to missing keys)");
  app.add_option("--set", sets, "Override a config key, e.g. --set train.po_lr=1e-6 (repeatable)");
  app.add_option("--seed", seed, "Global seed; overrides the config");
  app.add_option("--jobs", jobs, "Parallel episode workers; results do not depend on it");
  app.add_flag_callback(
      "--print-config",
      [&] {
        std::cout << cli::to_json(cli::RunConfig{}).dump(2) << '\n';
        std::exit(0);
      },
      "Print the default config and exit");

  auto* collect = app.add_subcommand("collect-demos", "Expert demonstrations on the train suite");
  auto* vocab = app.add_subcommand("build-vocab", "Trajectory vocabulary from the demonstrations");
  auto* pre = app.add_subcommand("pretrain", "Three-stage imitation pretraining");

  int round = 1;
  std::string checkpoint;
  auto* take = app.add_subcommand("collect-takeover", "Shadow-mode takeover collection, one round");
  take->add_option("--round", round, "Round index written to the dataset")->check(CLI::PositiveNumber);
  take->add_option("--checkpoint", checkpoint, "Policy to shadow (default: paths.pretrained)");

  std::optional<int> rounds;
  auto* post = app.add_subcommand("postopt", "Multi-round DAgger + preference optimization");
  post->add_option("--rounds", rounds, "Number of rounds (overrides train.rounds)")->check(CLI::NonNegativeNumber);
  post->add_option("--checkpoint", checkpoint, "Starting policy (default: paths.pretrained)");

  std::string suite = "test", traces;
  auto* ev = app.add_subcommand("eval", "Closed-loop evaluation");
  ev->add_option("--suite", suite, "test or validation")->check(CLI::IsMember({"test", "validation"}));
  ev->add_option("--checkpoint", checkpoint, "Policy to evaluate (default: paths.final_checkpoint)");
  ev->add_option("--traces", traces, "Directory for per-episode trace exports");

  auto* rep = app.add_subcommand("report", "Artifacts with their config hashes, and the round trend");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (seed) sets.push_back("seed=" + std::to_string(*seed));
    if (jobs) sets.push_back("jobs=" + std::to_string(*jobs));
    if (rounds) sets.push_back("train.rounds=" + std::to_string(*rounds));
    const auto cfg = cli::load_config(config_path, sets);
    auto& out = std::cout;
    if (*collect) cli::collect_demos(cfg, out);
    if (*vocab) cli::build_vocab(cfg, out);
    if (*pre) cli::pretrain(cfg, out);
    if (*take) cli::collect_takeover(cfg, round, checkpoint, out);
    if (*post) cli::postopt(cfg, checkpoint, out);
    if (*ev) cli::eval(cfg, suite, checkpoint, traces, out);
    if (*rep) cli::report(cfg, out);
  } catch (const cli::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

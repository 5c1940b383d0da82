#include "apc/harness/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "apc/common/errors.hpp"
#include "apc/harness/experiments.hpp"

namespace apc::harness {

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> layout;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
  std::optional<int> threads;
  std::vector<std::string> sets;
};

ExperimentConfig build_config(const std::string& experiment, const Flags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  c.experiment = experiment;
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) c.seed = *f.seed;
  if (f.layout) c.layout_path = *f.layout;
  if (f.out) c.output_dir = *f.out;
  if (f.checkpoint) c.checkpoint = *f.checkpoint;
  if (f.threads) c.threads = *f.threads;
  c.finalize();
  return c;
}

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

int run_experiment(const ExperimentConfig& c) {
  const std::string& e = c.experiment;
  std::printf("apc %s: seed=%llu output=%s\n", e.c_str(), static_cast<unsigned long long>(c.seed), c.output_dir.c_str());
  if (e == "train-options") {
    const auto s = run_train_options(c);
    for (const auto& ev : s.evals)
      std::printf("  option %d: success %.3f, mean steps %.2f (shortest %.2f)\n", ev.option_index, ev.success_rate,
                  ev.mean_steps, ev.mean_bfs_steps);
    std::printf("option mastery: %s\n", verdict(s.passed));
    return s.passed ? kExitOk : kExitFailed;
  }
  if (e == "train-worldmodel") {
    const auto s = run_train_worldmodel(c);
    std::printf("  held-out: %zu transitions, image exact %.4f, max location error %.3f slots\n", s.heldout.transitions,
                s.heldout.image_exact, s.heldout.max_location_error);
    std::printf("world-model fidelity: %s\n", verdict(s.passed));
    return s.passed ? kExitOk : kExitFailed;
  }
  if (e == "goal-change") {
    const auto s = run_goal_change(c);
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
      const auto& g = s.segments[i];
      std::printf("  goal %zu (%d,%d): apc plateau %.2f recovered at %d, flat plateau %.2f post-change max %.2f\n", i,
                  g.goal.cell().r, g.goal.cell().c, g.apc_plateau, g.apc_recovery, g.flat_plateau, g.flat_post_max);
    }
    std::printf("apc recovery: %s, flat stays below: %s\n", verdict(s.apc_passed), verdict(s.flat_passed));
    return s.passed() ? kExitOk : kExitFailed;
  }
  if (e == "plan-compare") {
    const auto s = run_plan_compare(c);
    for (const auto& r : s.rows)
      std::printf("  d=%d: apc %.2f +- %.2f, low-level %.2f +- %.2f\n", r.distance, r.apc_mean, r.apc_std, r.low_mean,
                  r.low_std);
    std::printf("apc slope %.3f; planning-step separation: %s\n", s.apc_slope, verdict(s.passed));
    return s.passed ? kExitOk : kExitFailed;
  }
  if (e == "transfer") {
    const auto s = run_transfer(c);
    for (const auto& l : s.layouts)
      std::printf("  %s: option success %.3f (base %.3f, max gap %.3f), reached %d/%d\n", l.name.c_str(), l.option_success,
                  l.base_success, l.max_option_gap, l.reached, l.navigations);
    std::printf("transfer reach rate %.3f: %s\n", s.reach_rate, verdict(s.passed));
    return s.passed ? kExitOk : kExitFailed;
  }
  const auto s = run_gradcheck(c);
  for (const auto& r : s.rows)
    std::printf("  %s (%d params): max relative error %.3g\n", r.loss.c_str(), r.params, r.max_rel_error);
  std::printf("gradient check: %s\n", verdict(s.passed));
  return s.passed ? kExitOk : kExitFailed;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Hierarchical planning with hypernetwork-generated options"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train-options", "train the eight options and write a checkpoint"},
      {"train-worldmodel", "train the high-level world model and add it to the checkpoint"},
      {"goal-change", "APC planning versus flat RL under goal changes"},
      {"plan-compare", "planning steps against goal distance, APC versus low-level MPC"},
      {"transfer", "reuse frozen options in new buildings"},
      {"gradcheck", "finite-difference check of every registered loss"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--layout", flags.layout, "building layout file")->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--checkpoint", flags.checkpoint, "checkpoint path (default <out>/checkpoint.apck)");
    sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--set", flags.sets, "override one config key, key=value (repeatable)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto config = build_config(app.get_subcommands().front()->get_name(), flags);
    return run_experiment(config);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "apc: configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "apc: bad input file: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "apc: numeric failure: %s\n", e.what());
    return kExitFailed;
  }
}

}  // namespace apc::harness

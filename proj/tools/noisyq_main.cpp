// noisyq command line: train DQN/NoisyNet agents on the built-in toy
// environments, craft adversarial-example attacks against them at test and
// training time, and summarize the comparisons.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "noisyq/harness/config.hpp"
#include "noisyq/harness/csv.hpp"
#include "noisyq/harness/experiments.hpp"

namespace {

using noisyq::harness::ConfigError;
using noisyq::harness::ExperimentConfig;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> overrides;  // section.key=value
  std::optional<std::string> env_name;
  std::optional<std::string> agent_kind;
  std::optional<long long> steps;
  std::optional<std::vector<long long>> seeds;
  std::optional<std::string> out_dir;
  std::optional<double> lambda;
  std::optional<std::string> source;
  std::optional<int> episodes;
  std::optional<std::string> noise_mode;
  std::optional<bool> early_stop;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_file, "experiment config file (INI)");
  cmd->add_option("--set", o.overrides, "override: section.key=value")->take_all();
  cmd->add_option("--env", o.env_name, "environment name (grid_pursuit | catcher)");
  cmd->add_option("--agent", o.agent_kind, "agent kind (eps_greedy | noisy)");
  cmd->add_option("--steps", o.steps, "training steps");
  cmd->add_option("--seed,--seeds", o.seeds, "seed list")->delimiter(',');
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--lambda", o.lambda, "perturbation budget");
  cmd->add_option("--source", o.source, "attack source (whitebox | blackbox)");
  cmd->add_option("--episodes", o.episodes, "evaluation episodes");
  cmd->add_option("--noise-mode", o.noise_mode, "noisy evaluation mode (sample | mean)");
  cmd->add_flag("--early-stop,!--no-early-stop", o.early_stop,
                "stop training once the eval return reaches the early-stop fraction of optimal");
}

ExperimentConfig build_config(const CommonOpts& o) {
  ExperimentConfig cfg;
  if (!o.config_file.empty()) cfg = ExperimentConfig::from_file(o.config_file);
  if (o.env_name) cfg.apply("env.name", *o.env_name);
  if (o.agent_kind) cfg.apply("trainer.kind", *o.agent_kind);
  if (o.steps) cfg.apply("trainer.steps", std::to_string(*o.steps));
  if (o.seeds) {
    cfg.seeds.clear();
    for (long long s : *o.seeds) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.lambda) cfg.apply("attack.lambda", noisyq::harness::fmt_double(*o.lambda));
  if (o.source) cfg.apply("attack.source", *o.source);
  if (o.episodes) cfg.apply("eval.episodes", std::to_string(*o.episodes));
  if (o.noise_mode) cfg.apply("trainer.noise_mode", *o.noise_mode);
  if (o.early_stop) cfg.early_stop = *o.early_stop;
  for (const std::string& kv : o.overrides) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set wants section.key=value, got '" + kv + "'");
    cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DQN / NoisyNet training and adversarial-example attack experiments"};
  app.require_subcommand(1);

  CommonOpts train_o, test_o, atrain_o, repl_o, stt_o, stt2_o;
  std::string target_ckpt, replica_ckpt;
  std::vector<std::string> compare_reports_args;
  std::string compare_out = "out/compare";

  CLI::App* train = app.add_subcommand("train", "train one agent per seed");
  add_common(train, train_o);

  CLI::App* attack_test = app.add_subcommand("attack-test", "test-time FGSM attack on a checkpoint");
  add_common(attack_test, test_o);
  attack_test->add_option("--target", target_ckpt, "target checkpoint")->required();
  attack_test->add_option("--replica", replica_ckpt, "replica checkpoint (blackbox)");

  CLI::App* attack_train = app.add_subcommand("attack-train",
                                              "policy-induction attack during training, with a matched control");
  add_common(attack_train, atrain_o);

  CLI::App* replicate = app.add_subcommand("replicate", "train a blackbox replica of a checkpoint");
  add_common(replicate, repl_o);
  replicate->add_option("--target", target_ckpt, "target checkpoint")->required();

  CLI::App* compare = app.add_subcommand("compare", "summarize attack reports side by side");
  compare->add_option("reports", compare_reports_args, "attack report CSVs")->required()->expected(-2);
  compare->add_option("--out", compare_out, "output directory");

  CLI::App* suite_test = app.add_subcommand("suite-test-time",
                                            "canned test-time protocol: both kinds, whitebox+blackbox, all seeds");
  add_common(suite_test, stt_o);

  CLI::App* suite_train = app.add_subcommand("suite-train-time",
                                             "canned training-time protocol: attacked runs with matched controls");
  add_common(suite_train, stt2_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      ExperimentConfig cfg = build_config(train_o);
      for (std::uint64_t seed : cfg.seeds) {
        auto r = noisyq::harness::run_train(cfg, seed);
        std::printf("train %s: steps=%lld final_return=%.4f oracle=%.4f -> %s\n",
                    r.run_id.c_str(), static_cast<long long>(r.summary.steps_run),
                    r.summary.final_eval_mean, r.oracle_return, r.dir.string().c_str());
      }
    } else if (*attack_test) {
      ExperimentConfig cfg = build_config(test_o);
      std::optional<std::filesystem::path> rep;
      if (!replica_ckpt.empty()) rep = replica_ckpt;
      for (std::uint64_t seed : cfg.seeds) {
        auto r = noisyq::harness::run_attack_test(cfg, seed, target_ckpt, rep);
        std::printf("attack-test %s: clean=%.4f random=%.4f adv=%.4f transfer=%.4f -> %s\n",
                    r.run_id.c_str(), r.report.clean_mean(), r.report.random_mean(),
                    r.report.adv_mean(), r.report.transfer_to_victim,
                    r.report_csv.string().c_str());
      }
    } else if (*attack_train) {
      ExperimentConfig cfg = build_config(atrain_o);
      for (std::uint64_t seed : cfg.seeds) {
        auto r = noisyq::harness::run_attack_train(cfg, seed);
        std::printf(
            "attack-train %s: control=%.4f attacked=%.4f trigger=%lld success=%.4f -> %s\n",
            r.run_id.c_str(), r.control_final, r.attacked_final,
            static_cast<long long>(r.trigger_step), r.attack_success_rate,
            r.dir.string().c_str());
      }
    } else if (*replicate) {
      ExperimentConfig cfg = build_config(repl_o);
      for (std::uint64_t seed : cfg.seeds) {
        auto r = noisyq::harness::run_replicate(cfg, seed, target_ckpt);
        std::printf("replicate %s: agreement %.4f -> %.4f over %lld steps -> %s\n",
                    r.run_id.c_str(), r.initial_agreement, r.final_agreement,
                    static_cast<long long>(r.observed_steps), r.dir.string().c_str());
      }
    } else if (*compare) {
      std::vector<std::filesystem::path> paths(compare_reports_args.begin(),
                                               compare_reports_args.end());
      auto out = noisyq::harness::compare_reports(paths, compare_out);
      std::fputs(out.text.c_str(), stdout);
      std::printf("summary -> %s\n", out.summary_csv.string().c_str());
    } else if (*suite_test) {
      ExperimentConfig cfg = build_config(stt_o);
      auto suite = noisyq::harness::run_suite_test_time(cfg);
      std::fputs(suite.compare.text.c_str(), stdout);
      std::printf("summary -> %s\n", suite.summary_csv.string().c_str());
    } else if (*suite_train) {
      ExperimentConfig cfg = build_config(stt2_o);
      auto suite = noisyq::harness::run_suite_train_time(cfg);
      std::printf("summary -> %s\n", suite.summary_csv.string().c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}

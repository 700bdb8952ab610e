#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "noisyq/agent.hpp"
#include "noisyq/attacks.hpp"
#include "noisyq/env.hpp"

namespace noisyq::harness {

/// Invalid configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AttackSettings {
  double lambda = 1.0 / 255.0;
  attacks::FgsmLoss loss = attacks::FgsmLoss::SoftmaxCrossEntropy;
  std::string source = "whitebox";  // whitebox | blackbox
  double attack_rate = 1.0;
  double trigger_fraction = 0.6;
  std::string adv_reward = "negate";  // negate | fixed:<action>
  std::int64_t adv_policy_steps = 20000;
  std::int64_t replica_steps = 25000;
  int replica_train_every = 1;
  std::optional<std::string> replica_kind;                 // defaults to the target's kind
  std::optional<std::vector<std::size_t>> replica_hidden;  // defaults to the target's widths
};

/// Everything one experiment needs: env, trainer, optional attack block,
/// seeds, and output location. Parsed from an INI-style file ([section],
/// key = value) with CLI overrides applied on top; the effective form is
/// serialized back into every run directory.
struct ExperimentConfig {
  envs::EnvSpec env = envs::EnvSpec::preset("grid_pursuit");
  agent::TrainerConfig trainer;
  AttackSettings attack;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::filesystem::path out_dir = "out";
  std::string run_label;
  bool early_stop = false;
  double early_stop_fraction = 0.9;  // of the oracle-optimal return
  std::vector<std::string> suite_envs = {"grid_pursuit", "catcher"};

  static ExperimentConfig from_file(const std::filesystem::path& path);
  /// Applies one "section.key=value" override (also used by CLI flags).
  void apply(const std::string& dotted_key, const std::string& value);
  void validate() const;
  /// Canonical INI form of the effective configuration.
  std::string serialize() const;
};

std::uint64_t config_hash(const std::string& serialized);

}  // namespace noisyq::harness

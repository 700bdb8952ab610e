#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "noisyq/agent.hpp"
#include "noisyq/attacks.hpp"
#include "noisyq/harness/config.hpp"
#include "noisyq/metrics.hpp"

namespace noisyq::harness {

/// Undiscounted mean return of the value-iteration-optimal policy over a
/// fixed, configuration-independent episode set; the yardstick for learning
/// sanity, early stopping, and attack triggers.
double oracle_optimal_return(const envs::EnvSpec& spec, double gamma, int episodes = 200);

std::vector<std::string> metrics_columns();
std::vector<std::string> metrics_cells(const MetricsRecord& rec);

struct TrainRunResult {
  std::string run_id;
  std::filesystem::path dir;
  std::filesystem::path metrics_csv;
  std::filesystem::path final_checkpoint;
  agent::RunSummary summary;
  double oracle_return = 0.0;
};

/// Trains one agent for one seed; writes config copy, metrics CSV,
/// checkpoints at eval points (latest) and at the end (final), and a
/// manifest.
TrainRunResult run_train(const ExperimentConfig& cfg, std::uint64_t seed);

struct ReplicateResult {
  std::string run_id;
  std::filesystem::path dir;
  std::filesystem::path replica_checkpoint;
  std::filesystem::path agreement_csv;
  double initial_agreement = 0.0;
  double final_agreement = 0.0;
  std::int64_t observed_steps = 0;
};

/// Rolls out a trained target, trains a replica on the observed transition
/// stream only, and tracks policy agreement over training.
ReplicateResult run_replicate(const ExperimentConfig& cfg, std::uint64_t seed,
                              const std::filesystem::path& target_checkpoint);

struct AttackTestResult {
  std::string run_id;
  std::filesystem::path dir;
  std::filesystem::path report_csv;
  attacks::AttackReport report;
};

/// Test-time attack evaluation of a trained checkpoint; blackbox mode needs
/// a replica checkpoint.
AttackTestResult run_attack_test(const ExperimentConfig& cfg, std::uint64_t seed,
                                 const std::filesystem::path& target_checkpoint,
                                 const std::optional<std::filesystem::path>& replica_checkpoint);

struct AttackTrainResult {
  std::string run_id;
  std::filesystem::path dir;
  std::filesystem::path metrics_csv;  // control and attacked interleaved by step
  std::filesystem::path control_checkpoint;
  std::filesystem::path attacked_checkpoint;
  double control_final = 0.0;
  double attacked_final = 0.0;
  std::int64_t trigger_step = -1;
  double attack_success_rate = 0.0;
  double oracle_return = 0.0;
};

/// Policy-induction attack on a training run alongside an unattacked control
/// with matched seed streams. A prebuilt adversarial policy may be shared
/// across calls; otherwise one is trained from the attacker's streams.
AttackTrainResult run_attack_train(const ExperimentConfig& cfg, std::uint64_t seed,
                                   Policy* adv_policy = nullptr);

struct CompareClaim {
  std::string claim;
  std::string env;
  std::string source;
  int seeds_total = 0;
  int seeds_satisfied = 0;
  std::string verdict;  // pass | fail | insufficient-seeds
};

struct CompareOutput {
  std::string text;  // aligned human-readable table
  std::vector<CompareClaim> claims;
  std::filesystem::path summary_csv;
};

/// Cross-report summary: per-condition means and deviations, degradation
/// ratios, transferability, and seed-majority verdicts for the paired
/// plain-vs-noisy claims.
CompareOutput compare_reports(const std::vector<std::filesystem::path>& report_csvs,
                              const std::filesystem::path& out_dir);

struct TestTimeCell {
  std::string env;
  std::string kind;
  std::uint64_t seed = 0;
  TrainRunResult train;
  ReplicateResult replicate;
  attacks::AttackReport whitebox;
  attacks::AttackReport blackbox;
  std::filesystem::path whitebox_csv;
  std::filesystem::path blackbox_csv;
  double transfer_replica_rate = 0.0;  // replica-crafted flips on the victim, shared sample
  double transfer_self_rate = 0.0;     // victim-crafted flips on itself, same sample
};

struct TestTimeSuiteResult {
  std::vector<TestTimeCell> cells;
  std::filesystem::path summary_csv;
  CompareOutput compare;
};

/// The full test-time protocol: per env and seed, train both agent kinds,
/// build replicas, run whitebox and blackbox attacks, measure
/// transferability on a shared 1000-state sample, and summarize. Cells run
/// in parallel.
TestTimeSuiteResult run_suite_test_time(const ExperimentConfig& cfg);

struct TrainTimeCell {
  std::string env;
  std::string kind;
  std::uint64_t seed = 0;
  AttackTrainResult result;
};

struct TrainTimeSuiteResult {
  std::vector<TrainTimeCell> cells;
  std::filesystem::path summary_csv;
};

/// The full training-time protocol: per env and seed, attacked runs of both
/// agent kinds with matched unattacked controls. Cells run in parallel; the
/// adversarial policy is trained once per env and shared.
TrainTimeSuiteResult run_suite_train_time(const ExperimentConfig& cfg);

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                    const std::vector<std::filesystem::path>& checkpoints, double wall_seconds,
                    const std::string& status);

}  // namespace noisyq::harness

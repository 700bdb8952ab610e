#pragma once

#include <cstdint>
#include <string>

namespace noisyq::harness {

/// One row of the training metrics stream. Optional fields carry a `has_*`
/// flag so the CSV layer can leave them empty rather than fake zeros.
struct MetricsRecord {
  std::string run_id;
  std::string arm = "train";  // train | control | attacked
  std::uint64_t seed = 0;
  std::string agent_kind;
  std::string env_name;
  std::int64_t step = 0;
  int eval_episodes = 0;
  double mean_return = 0.0;
  double min_return = 0.0;
  double max_return = 0.0;
  double stderr_return = 0.0;
  double td_loss = 0.0;
  bool has_td_loss = false;
  double epsilon = 0.0;
  bool has_epsilon = false;     // eps-greedy agents only
  std::string noise_mode;       // noisy agents only
  bool attacked = false;
  double attack_success_rate = 0.0;
  bool has_attack_success = false;  // post-trigger rows of attacked runs
  double transfer_rate = 0.0;
  bool has_transfer_rate = false;
};

}  // namespace noisyq::harness

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "noisyq/env.hpp"
#include "noisyq/metrics.hpp"
#include "noisyq/network.hpp"
#include "noisyq/policy.hpp"
#include "noisyq/rng.hpp"

namespace noisyq::agent {

struct Transition {
  envs::Observation s;
  int a = 0;
  double r = 0.0;  // clipped
  envs::Observation s2;
  bool terminal = false;
};

/// FIFO ring buffer of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_[i]; }

  /// Uniform sample with replacement; draws come from the caller's stream.
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

struct EpsSchedule {
  double start = 1.0;
  double end = 0.02;
  std::int64_t decay_steps = 5000;

  /// Linear from start to end over decay_steps, then constant.
  double at(std::int64_t step) const {
    if (decay_steps <= 0 || step >= decay_steps) return end;
    double f = static_cast<double>(step) / static_cast<double>(decay_steps);
    return start + (end - start) * f;
  }
};

enum class AgentKind { EpsGreedy, Noisy };
enum class NoiseMode { Sample, Mean };

std::string agent_kind_name(AgentKind k);
AgentKind agent_kind_from_name(const std::string& name);
std::string noise_mode_name(NoiseMode m);
NoiseMode noise_mode_from_name(const std::string& name);

struct TrainerConfig {
  AgentKind kind = AgentKind::EpsGreedy;
  double gamma = 0.99;
  double lr = 1e-3;
  int batch = 32;
  int capacity = 10000;
  int sync_period = 500;
  std::int64_t total_steps = 50000;
  std::int64_t learn_start = 1000;
  EpsSchedule eps;                            // ignored by the Noisy kind
  std::vector<std::size_t> hidden = {64, 64};
  nets::TargetNoiseMode target_noise = nets::TargetNoiseMode::Frozen;
  NoiseMode eval_noise = NoiseMode::Sample;
  std::uint64_t seed = 0;
  int eval_cadence = 1000;
  int eval_episodes = 100;

  void validate() const;
};

double clip_reward(double r);

/// Per-row Bellman targets from the frozen network: y = r for terminal rows,
/// else y = r + gamma * max_a Q(s', a). Constants with respect to training.
std::vector<double> compute_target(const std::vector<const Transition*>& batch,
                                   const nets::TargetNetwork& target, double gamma);

/// One replay step of the DQN objective: sample a batch, regress the
/// taken-action Q-values onto compute_target, apply one plain SGD update,
/// and sync the target every sync_period calls. Noisy networks draw one
/// fresh noise sample per call, held constant across the batch. Returns the
/// batch loss. Shared by the trainer and the attacker's replica.
double dqn_train_step(nets::QNetwork& net, nets::TargetNetwork& target, const ReplayBuffer& buffer,
                      const TrainerConfig& cfg, Rng& replay_rng, Rng& noise_rng,
                      Rng& target_noise_rng, std::int64_t& train_calls);

/// Frozen network usable as a Policy. Sample mode redraws noise each step;
/// Mean mode zeroes the noise so effective weights collapse to mu.
class PolicySnapshot final : public Policy {
 public:
  PolicySnapshot(nets::QNetwork net, NoiseMode mode, std::uint64_t noise_seed);

  void begin_step() override;
  int act_current(const envs::Observation& obs) override { return greedy_current(obs); }
  int greedy_current(const envs::Observation& obs) const { return net_.greedy_action(obs); }

  nets::QNetwork& network() { return net_; }
  const nets::QNetwork& network() const { return net_; }
  NoiseMode mode() const { return mode_; }

 private:
  nets::QNetwork net_;
  NoiseMode mode_;
  Rng noise_rng_;
};

/// Observation rewriter applied before action selection during evaluation;
/// attacks implement this. after_action() lets implementations collect
/// flip statistics for the step they just perturbed.
class Perturber {
 public:
  virtual ~Perturber() = default;
  virtual envs::Observation perturb(const envs::Observation& clean) = 0;
  virtual void after_action(int /*action*/) {}
};

struct EvalResult {
  std::vector<double> returns;  // raw (unclipped) per-episode reward sums
  std::int64_t steps = 0;
  double mean() const;
  double min() const;
  double max() const;
  double stderr_mean() const;
};

/// Runs greedy episodes; episode seeds derive from seed_base so matched
/// configurations see identical episodes. With a perturber, every
/// observation is replaced before the policy sees it.
EvalResult evaluate_policy(Policy& policy, envs::Env& env, int episodes,
                           std::uint64_t seed_base, Perturber* perturber = nullptr);

/// Hook points the training-time attacker plugs into. All methods see the
/// target's data flow but none of its parameters.
class StepInterceptor {
 public:
  virtual ~StepInterceptor() = default;
  /// May rewrite the observation about to be delivered to the agent.
  /// Terminal observations are passed through for bookkeeping but the
  /// return value is ignored for them.
  virtual envs::Observation deliver_obs(const envs::Observation& clean, bool terminal,
                                        std::int64_t step) = 0;
  /// The agent chose `action` from `seen`.
  virtual void on_action(std::int64_t step, const envs::Observation& seen, int action) = 0;
  /// The agent stored this transition.
  virtual void on_transition(const Transition& stored) = 0;
  virtual void on_eval(std::int64_t step, double mean_return) = 0;
};

struct RunHooks {
  StepInterceptor* interceptor = nullptr;
  std::function<void(const harness::MetricsRecord&)> on_metrics;
  std::function<void(const nets::QNetwork&, std::int64_t step, bool final)> on_checkpoint;
  /// Stop after the first evaluation whose mean return reaches this value.
  std::optional<double> early_stop_return;
  std::string run_id;
};

struct EvalPoint {
  std::int64_t step = 0;
  double mean_return = 0.0;
};

struct RunSummary {
  std::int64_t steps_run = 0;
  double final_eval_mean = 0.0;
  std::vector<EvalPoint> eval_curve;
  std::int64_t episodes_seen = 0;
  bool early_stopped = false;
};

/// DQN trainer: act, clip, store, replay-train each step after learn_start,
/// periodic greedy evaluation, target sync every sync_period train calls.
class Trainer {
 public:
  Trainer(envs::Env& env, TrainerConfig cfg);

  RunSummary run(const RunHooks& hooks = {});

  int select_action(const envs::Observation& obs, std::int64_t step);
  double train_step();

  nets::QNetwork& net() { return net_; }
  const nets::QNetwork& net() const { return net_; }
  const nets::TargetNetwork& target() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  const TrainerConfig& config() const { return cfg_; }
  PolicySnapshot snapshot() const;

  std::int64_t random_action_count() const { return random_actions_; }
  std::int64_t train_calls() const { return train_calls_; }

 private:
  envs::Env& env_;
  TrainerConfig cfg_;
  nets::QNetwork net_;
  nets::TargetNetwork target_;
  ReplayBuffer buffer_;
  Rng env_rng_, action_rng_, noise_rng_, target_noise_rng_, replay_rng_;
  std::uint64_t eval_seed_base_ = 0;
  std::uint64_t snapshot_noise_seed_ = 0;
  std::int64_t train_calls_ = 0;
  std::int64_t random_actions_ = 0;
};

}  // namespace noisyq::agent

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "noisyq/agent.hpp"
#include "noisyq/env.hpp"
#include "noisyq/network.hpp"
#include "noisyq/rng.hpp"

namespace noisyq::attacks {

/// Per-entry max-norm cap on observation perturbations. Zero is the
/// neutrality value (full pipeline, exact zero perturbation); negative is an
/// error.
struct PerturbationBudget {
  double lambda = 1.0 / 255.0;
  void validate() const;
};

/// Surrogate loss for gradient-sign crafting against Q-outputs. The softmax
/// cross-entropy form treats the chosen action as a class label; NegQ ascends
/// or descends the raw Q-value of the label action.
enum class FgsmLoss { SoftmaxCrossEntropy, NegQ };

std::string fgsm_loss_name(FgsmLoss l);
FgsmLoss fgsm_loss_from_name(const std::string& name);

enum class CraftMode { Untargeted, Targeted };

struct AdversarialExample {
  envs::Observation clean;
  std::vector<double> delta;     // pre-clip perturbation, |delta|_inf <= lambda
  envs::Observation perturbed;   // clip_[0,1](clean + delta)
  CraftMode mode = CraftMode::Untargeted;
  int target_action = -1;        // targeted mode only
  bool success = false;          // targeted: argmax on the crafting net == target_action
  double lambda = 0.0;
  std::string crafted_on;        // tag of the crafting network
};

/// Gradient-sign step against the action the network currently prefers:
/// delta = lambda * sign(d loss(Q(obs), argmax) / d obs). Zero-gradient
/// entries stay untouched.
AdversarialExample fgsm_untargeted(const nets::QNetwork& net, const envs::Observation& obs,
                                   double lambda, FgsmLoss loss = FgsmLoss::SoftmaxCrossEntropy);

/// Gradient-sign step toward a chosen action:
/// delta = -lambda * sign(d loss(Q(obs), a_adv) / d obs).
AdversarialExample fgsm_targeted(const nets::QNetwork& net, const envs::Observation& obs,
                                 int a_adv, double lambda,
                                 FgsmLoss loss = FgsmLoss::SoftmaxCrossEntropy);

/// Magnitude-matched baseline: each entry perturbed by +-lambda uniformly.
AdversarialExample random_noise_example(const envs::Observation& obs, double lambda, Rng& rng);

struct ReplicaConfig {
  agent::TrainerConfig trainer;  // hyperparameters for the replica's own DQN updates
  int train_every = 1;           // replay steps per observed transition
};

/// Attacker-trained stand-in for the target network. It sees only observed
/// transitions, never the target's parameters; it owns its own target
/// network (the crafting net at training time) and replay buffer.
class Replica {
 public:
  Replica(const nets::Arch& assumed_arch, ReplicaConfig cfg, std::uint64_t seed);

  /// Feed one observed transition; trains per the replica's own schedule.
  void observe(const agent::Transition& t);

  const nets::QNetwork& net() const { return net_; }
  nets::QNetwork& net() { return net_; }
  /// The replica's frozen copy, used for training-time crafting.
  const nets::QNetwork& crafting_net() const { return target_.net(); }

  std::int64_t observed() const { return observed_; }
  std::int64_t trained() const { return train_calls_; }

 private:
  ReplicaConfig cfg_;
  nets::QNetwork net_;
  nets::TargetNetwork target_;
  agent::ReplayBuffer buffer_;
  Rng replay_rng_, noise_rng_, target_noise_rng_;
  std::int64_t observed_ = 0;
  std::int64_t train_calls_ = 0;
};

/// Runs the replica over a recorded transition stream.
void train_replica(Replica& replica, const std::vector<agent::Transition>& stream);

/// Fraction of states on which two networks pick the same greedy action.
/// Noisy networks are compared at their mean weights.
double policy_agreement(const nets::QNetwork& a, const nets::QNetwork& b,
                        const std::vector<envs::Observation>& states);

/// Per-attack-configuration outcome of a test-time evaluation.
struct AttackReport {
  std::string run_id;
  std::string env_name;
  std::string agent_kind;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::string source;  // whitebox | blackbox
  std::string loss;
  int episodes = 0;
  std::vector<double> clean_returns;
  std::vector<double> random_returns;
  std::vector<double> adv_returns;
  double success_on_source = 0.0;   // flip rate on the crafting network
  double transfer_to_victim = 0.0;  // fraction of crafted examples that change the victim's argmax
  std::int64_t crafted = 0;

  double clean_mean() const;
  double random_mean() const;
  double adv_mean() const;
  /// (clean - adv) / clean; 0 when the clean mean is not positive.
  double degradation() const;
};

struct TestTimeAttackConfig {
  double lambda = 1.0 / 255.0;
  int episodes = 100;
  FgsmLoss loss = FgsmLoss::SoftmaxCrossEntropy;
  agent::NoiseMode victim_noise = agent::NoiseMode::Sample;
  double attack_rate = 1.0;  // fraction of steps perturbed
  std::uint64_t seed = 0;
};

/// Evaluates a trained victim three ways with matched episode seeds and
/// matched victim noise: clean, random +-lambda noise, and per-step FGSM
/// crafted on `replica_net` (blackbox) or on the victim itself (whitebox,
/// replica_net == nullptr).
AttackReport test_time_attack(const nets::QNetwork& victim_net, envs::Env& env,
                              const nets::QNetwork* replica_net, const TestTimeAttackConfig& cfg);

/// Fraction of sampled states where an untargeted example crafted on
/// `source` changes `victim`'s greedy action. With a targeted policy given,
/// counts inductions of that policy's action instead.
struct TransferConfig {
  double lambda = 1.0 / 255.0;
  FgsmLoss loss = FgsmLoss::SoftmaxCrossEntropy;
  CraftMode mode = CraftMode::Untargeted;
  Policy* targeted_policy = nullptr;  // supplies a_adv in targeted mode
  std::uint64_t noise_seed = 0;       // drives noisy source/victim samples
};

double transferability_rate(const nets::QNetwork& source, const nets::QNetwork& victim,
                            const std::vector<envs::Observation>& states,
                            const TransferConfig& cfg);

/// Adversary reward for training pi*_adv: negate the env reward (return
/// minimizing), or reward a fixed action.
struct AdvReward {
  enum class Kind { Negate, FixedAction } kind = Kind::Negate;
  int fixed_action = 0;
};

struct TrainTimeAttackConfig {
  double lambda = 1.0 / 255.0;
  FgsmLoss loss = FgsmLoss::SoftmaxCrossEntropy;
  double trigger_fraction = 0.6;      // of the oracle-optimal mean return
  double oracle_optimal_return = 0.0;
  AdvReward adv_reward;
  agent::TrainerConfig adv_trainer;   // for training pi*_adv when reward is Negate
  ReplicaConfig replica;
  std::uint64_t attacker_seed = 0;
};

/// The training-time exploitation cycle: after the target's returns first
/// reach the trigger, every non-terminal observation delivered to it is
/// replaced by a targeted example crafted on the attacker's replica so the
/// Bellman argmax follows pi*_adv; the replica keeps training on what the
/// target experiences.
class PolicyInductionAttacker final : public agent::StepInterceptor {
 public:
  PolicyInductionAttacker(Policy& adv_policy, const nets::Arch& assumed_arch,
                          const TrainTimeAttackConfig& cfg);

  envs::Observation deliver_obs(const envs::Observation& clean, bool terminal,
                                std::int64_t step) override;
  void on_action(std::int64_t step, const envs::Observation& seen, int action) override;
  void on_transition(const agent::Transition& stored) override;
  void on_eval(std::int64_t step, double mean_return) override;

  bool triggered() const { return triggered_; }
  std::int64_t trigger_step() const { return trigger_step_; }
  std::int64_t attacked_steps() const { return attacked_steps_; }
  /// Fraction of post-trigger steps where the target played pi*_adv's action.
  double success_rate() const;
  const Replica& replica() const { return replica_; }
  std::int64_t ignored_pre_trigger() const { return ignored_pre_trigger_; }

 private:
  TrainTimeAttackConfig cfg_;
  Policy& adv_policy_;
  Replica replica_;
  bool triggered_ = false;
  std::int64_t trigger_step_ = -1;
  std::int64_t attacked_steps_ = 0;
  std::int64_t induced_ = 0;
  std::int64_t ignored_pre_trigger_ = 0;
  int pending_adv_action_ = -1;
};

/// Trains pi*_adv with the standard DQN machinery on the attacker's reward.
/// Returns a mean-mode snapshot (deterministic at attack time).
std::unique_ptr<Policy> train_adversarial_policy(envs::Env& env, const AdvReward& reward,
                                                 const agent::TrainerConfig& cfg);

struct TrainTimeAttackResult {
  agent::RunSummary summary;
  std::int64_t trigger_step = -1;
  double attack_success_rate = 0.0;
  std::int64_t attacked_steps = 0;
};

/// Runs one attacked training run end to end: builds pi*_adv (unless a
/// prebuilt one is passed) and the replica, then trains the target with the
/// attacker in the loop. Metrics hooks receive the target's records with
/// attack columns filled.
TrainTimeAttackResult policy_induction_attack(envs::Env& env, const agent::TrainerConfig& target_cfg,
                                              const TrainTimeAttackConfig& cfg,
                                              const agent::RunHooks& hooks = {},
                                              Policy* adv_policy = nullptr);

}  // namespace noisyq::attacks

#include "noisyq/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "noisyq/audit.hpp"
#include "noisyq/graph.hpp"

namespace noisyq::attacks {

void PerturbationBudget::validate() const {
  if (lambda < 0.0 || !std::isfinite(lambda)) {
    throw std::invalid_argument("PerturbationBudget: lambda must be finite and >= 0");
  }
}

std::string fgsm_loss_name(FgsmLoss l) {
  return l == FgsmLoss::SoftmaxCrossEntropy ? "softmax_ce" : "neg_q";
}

FgsmLoss fgsm_loss_from_name(const std::string& name) {
  if (name == "softmax_ce") return FgsmLoss::SoftmaxCrossEntropy;
  if (name == "neg_q") return FgsmLoss::NegQ;
  throw std::invalid_argument("unknown fgsm loss '" + name + "'");
}

namespace {

double sign_of(double x) { return static_cast<double>(x > 0.0) - static_cast<double>(x < 0.0); }

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::vector<double> surrogate_input_gradient(const nets::QNetwork& net,
                                             const envs::Observation& obs, int label,
                                             FgsmLoss loss) {
  ad::Graph g;
  ad::NodeId x = g.leaf(Tensor::matrix(1, obs.size(), obs));
  ad::NodeId q = net.forward(g, x);
  ad::NodeId l;
  if (loss == FgsmLoss::SoftmaxCrossEntropy) {
    l = g.cross_entropy_logits(q, label);
  } else {
    l = g.scale(g.select_actions(q, {label}), -1.0);
  }
  std::vector<Tensor> grads = g.backward(l);
  const Tensor& gx = grads[static_cast<std::size_t>(x)];
  std::vector<double> out(gx.numel());
  for (std::size_t i = 0; i < gx.numel(); ++i) out[i] = gx[i];
  return out;
}

AdversarialExample finish_example(const envs::Observation& clean, std::vector<double> delta,
                                  double lambda, CraftMode mode, const std::string& crafted_on) {
  AdversarialExample ex;
  ex.clean = clean;
  ex.perturbed.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (std::fabs(delta[i]) > lambda) {
      throw std::logic_error("adversarial example violates the perturbation budget");
    }
    ex.perturbed[i] = clip01(clean[i] + delta[i]);
    if (ex.perturbed[i] < 0.0 || ex.perturbed[i] > 1.0) {
      throw std::logic_error("adversarial example escaped the [0,1] range");
    }
  }
  ex.delta = std::move(delta);
  ex.lambda = lambda;
  ex.mode = mode;
  ex.crafted_on = crafted_on;
  return ex;
}

}  // namespace

AdversarialExample fgsm_untargeted(const nets::QNetwork& net, const envs::Observation& obs,
                                   double lambda, FgsmLoss loss) {
  PerturbationBudget{lambda}.validate();
  int preferred = net.greedy_action(obs);
  std::vector<double> grad = surrogate_input_gradient(net, obs, preferred, loss);
  std::vector<double> delta(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) delta[i] = lambda * sign_of(grad[i]);
  AdversarialExample ex = finish_example(obs, std::move(delta), lambda, CraftMode::Untargeted,
                                         net.tag().empty() ? "unnamed" : net.tag());
  ex.success = net.greedy_action(ex.perturbed) != preferred;
  return ex;
}

AdversarialExample fgsm_targeted(const nets::QNetwork& net, const envs::Observation& obs,
                                 int a_adv, double lambda, FgsmLoss loss) {
  PerturbationBudget{lambda}.validate();
  if (a_adv < 0 || static_cast<std::size_t>(a_adv) >= net.action_count()) {
    throw std::invalid_argument("fgsm_targeted: action " + std::to_string(a_adv) + " out of range");
  }
  std::vector<double> grad = surrogate_input_gradient(net, obs, a_adv, loss);
  std::vector<double> delta(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) delta[i] = -lambda * sign_of(grad[i]);
  AdversarialExample ex = finish_example(obs, std::move(delta), lambda, CraftMode::Targeted,
                                         net.tag().empty() ? "unnamed" : net.tag());
  ex.target_action = a_adv;
  ex.success = net.greedy_action(ex.perturbed) == a_adv;
  return ex;
}

AdversarialExample random_noise_example(const envs::Observation& obs, double lambda, Rng& rng) {
  PerturbationBudget{lambda}.validate();
  std::vector<double> delta(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    delta[i] = rng.uniform() < 0.5 ? -lambda : lambda;
  }
  return finish_example(obs, std::move(delta), lambda, CraftMode::Untargeted, "random");
}

Replica::Replica(const nets::Arch& assumed_arch, ReplicaConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      buffer_(static_cast<std::size_t>(cfg_.trainer.capacity)),
      replay_rng_(seed, "replica-replay"),
      noise_rng_(seed, "replica-noise"),
      target_noise_rng_(seed, "replica-target-noise") {
  cfg_.trainer.validate();
  if (cfg_.train_every < 1) throw std::invalid_argument("Replica: train_every must be >= 1");
  Rng init_rng(seed, "replica-init");
  net_ = nets::QNetwork::init(assumed_arch, init_rng);
  net_.set_tag("replica");
  target_ = nets::TargetNetwork(net_, target_noise_rng_);
}

void Replica::observe(const agent::Transition& t) {
  buffer_.push(t);
  ++observed_;
  if (observed_ >= cfg_.trainer.learn_start &&
      buffer_.size() >= static_cast<std::size_t>(cfg_.trainer.batch) &&
      observed_ % cfg_.train_every == 0) {
    agent::dqn_train_step(net_, target_, buffer_, cfg_.trainer, replay_rng_, noise_rng_,
                          target_noise_rng_, train_calls_);
  }
}

void train_replica(Replica& replica, const std::vector<agent::Transition>& stream) {
  audit::AttackerScope scope;
  for (const agent::Transition& t : stream) replica.observe(t);
}

double policy_agreement(const nets::QNetwork& a, const nets::QNetwork& b,
                        const std::vector<envs::Observation>& states) {
  if (states.empty()) throw std::invalid_argument("policy_agreement: empty state sample");
  nets::QNetwork ca = a;
  nets::QNetwork cb = b;
  ca.zero_noise();
  cb.zero_noise();
  int agree = 0;
  for (const envs::Observation& s : states) {
    agree += ca.greedy_action(s) == cb.greedy_action(s);
  }
  return static_cast<double>(agree) / static_cast<double>(states.size());
}

double AttackReport::clean_mean() const {
  double s = 0;
  for (double r : clean_returns) s += r;
  return clean_returns.empty() ? 0.0 : s / clean_returns.size();
}
double AttackReport::random_mean() const {
  double s = 0;
  for (double r : random_returns) s += r;
  return random_returns.empty() ? 0.0 : s / random_returns.size();
}
double AttackReport::adv_mean() const {
  double s = 0;
  for (double r : adv_returns) s += r;
  return adv_returns.empty() ? 0.0 : s / adv_returns.size();
}
double AttackReport::degradation() const {
  double c = clean_mean();
  if (c <= 0.0) return 0.0;
  return (c - adv_mean()) / c;
}

namespace {

class RandomNoisePerturber final : public agent::Perturber {
 public:
  RandomNoisePerturber(double lambda, std::uint64_t seed) : lambda_(lambda), rng_(seed, "random-noise") {}
  envs::Observation perturb(const envs::Observation& clean) override {
    return random_noise_example(clean, lambda_, rng_).perturbed;
  }

 private:
  double lambda_;
  Rng rng_;
};

/// Crafts an untargeted example on the source network every (attacked) step
/// and tracks flip rates on source and victim.
class FgsmEvalPerturber final : public agent::Perturber {
 public:
  FgsmEvalPerturber(const nets::QNetwork* source, agent::PolicySnapshot* victim, bool blackbox,
                    const TestTimeAttackConfig& cfg)
      : source_(source),
        victim_(victim),
        blackbox_(blackbox),
        cfg_(cfg),
        rate_rng_(cfg.seed, "attack-rate") {}

  envs::Observation perturb(const envs::Observation& clean) override {
    pending_ = false;
    if (cfg_.attack_rate < 1.0 && !rate_rng_.bernoulli(cfg_.attack_rate)) return clean;
    victim_clean_action_ = victim_->greedy_current(clean);
    AdversarialExample ex;
    if (blackbox_) {
      audit::AttackerScope scope;
      ex = fgsm_untargeted(*source_, clean, cfg_.lambda, cfg_.loss);
    } else {
      ex = fgsm_untargeted(*source_, clean, cfg_.lambda, cfg_.loss);
    }
    ++crafted_;
    source_flips_ += ex.success ? 1 : 0;
    pending_ = true;
    return ex.perturbed;
  }

  void after_action(int action) override {
    if (!pending_) return;
    ++compared_;
    if (action != victim_clean_action_) ++victim_flips_;
    pending_ = false;
  }

  std::int64_t crafted() const { return crafted_; }
  double source_flip_rate() const {
    return crafted_ ? static_cast<double>(source_flips_) / crafted_ : 0.0;
  }
  double victim_flip_rate() const {
    return compared_ ? static_cast<double>(victim_flips_) / compared_ : 0.0;
  }

 private:
  const nets::QNetwork* source_;
  agent::PolicySnapshot* victim_;
  bool blackbox_;
  TestTimeAttackConfig cfg_;
  Rng rate_rng_;
  bool pending_ = false;
  int victim_clean_action_ = 0;
  std::int64_t crafted_ = 0;
  std::int64_t source_flips_ = 0;
  std::int64_t victim_flips_ = 0;
  std::int64_t compared_ = 0;
};

}  // namespace

AttackReport test_time_attack(const nets::QNetwork& victim_net, envs::Env& env,
                              const nets::QNetwork* replica_net, const TestTimeAttackConfig& cfg) {
  PerturbationBudget{cfg.lambda}.validate();
  if (cfg.episodes < 1) throw std::invalid_argument("test_time_attack: episodes must be >= 1");

  std::uint64_t episode_base = substream_seed(cfg.seed, "attack-eval");
  std::uint64_t victim_noise_seed = substream_seed(cfg.seed, "victim-noise");
  agent::NoiseMode mode =
      victim_net.kind() == nets::Kind::Noisy ? cfg.victim_noise : agent::NoiseMode::Mean;

  AttackReport report;
  report.env_name = env.spec().name;
  report.agent_kind = victim_net.kind() == nets::Kind::Noisy ? "noisy" : "eps_greedy";
  report.lambda = cfg.lambda;
  report.source = replica_net ? "blackbox" : "whitebox";
  report.loss = fgsm_loss_name(cfg.loss);
  report.episodes = cfg.episodes;
  report.seed = cfg.seed;

  {
    agent::PolicySnapshot snap(victim_net, mode, victim_noise_seed);
    report.clean_returns = agent::evaluate_policy(snap, env, cfg.episodes, episode_base).returns;
  }
  {
    agent::PolicySnapshot snap(victim_net, mode, victim_noise_seed);
    RandomNoisePerturber perturber(cfg.lambda, substream_seed(cfg.seed, "random-cond"));
    report.random_returns =
        agent::evaluate_policy(snap, env, cfg.episodes, episode_base, &perturber).returns;
  }
  {
    agent::PolicySnapshot snap(victim_net, mode, victim_noise_seed);
    const nets::QNetwork* source = replica_net ? replica_net : &snap.network();
    FgsmEvalPerturber perturber(source, &snap, replica_net != nullptr, cfg);
    report.adv_returns =
        agent::evaluate_policy(snap, env, cfg.episodes, episode_base, &perturber).returns;
    report.success_on_source = perturber.source_flip_rate();
    report.transfer_to_victim = perturber.victim_flip_rate();
    report.crafted = perturber.crafted();
  }
  return report;
}

double transferability_rate(const nets::QNetwork& source, const nets::QNetwork& victim,
                            const std::vector<envs::Observation>& states,
                            const TransferConfig& cfg) {
  if (states.empty()) throw std::invalid_argument("transferability_rate: empty state sample");
  PerturbationBudget{cfg.lambda}.validate();
  if (cfg.mode == CraftMode::Targeted && !cfg.targeted_policy) {
    throw std::invalid_argument("transferability_rate: targeted mode needs a policy");
  }
  nets::QNetwork src = source;
  nets::QNetwork vic = victim;
  Rng src_rng(cfg.noise_seed, "transfer-source-noise");
  Rng vic_rng(cfg.noise_seed, "transfer-victim-noise");
  std::int64_t hits = 0;
  for (const envs::Observation& obs : states) {
    if (src.kind() == nets::Kind::Noisy) src.sample_noise(src_rng);
    if (vic.kind() == nets::Kind::Noisy) vic.sample_noise(vic_rng);
    if (cfg.mode == CraftMode::Untargeted) {
      int before = vic.greedy_action(obs);
      AdversarialExample ex = fgsm_untargeted(src, obs, cfg.lambda, cfg.loss);
      hits += vic.greedy_action(ex.perturbed) != before;
    } else {
      int a_adv = cfg.targeted_policy->act(obs);
      AdversarialExample ex = fgsm_targeted(src, obs, a_adv, cfg.lambda, cfg.loss);
      hits += vic.greedy_action(ex.perturbed) == a_adv;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(states.size());
}

namespace {

class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(int action) : action_(action) {}
  int act_current(const envs::Observation&) override { return action_; }

 private:
  int action_;
};

/// Same dynamics, negated rewards: the return-minimizing adversary's MDP.
class NegatedRewardEnv final : public envs::Env {
 public:
  explicit NegatedRewardEnv(std::unique_ptr<envs::Env> inner)
      : Env(inner->spec()), inner_(std::move(inner)) {}

  envs::Observation reset(std::uint64_t seed) override {
    envs::Observation obs = inner_->reset(seed);
    done_ = inner_->done();
    steps_ = 0;
    return obs;
  }
  envs::StepResult step(int action) override {
    envs::StepResult r = inner_->step(action);
    r.reward = -r.reward;
    done_ = inner_->done();
    return r;
  }
  int state_count() const override { return inner_->state_count(); }
  int current_state() const override { return inner_->current_state(); }
  bool state_terminal(int s) const override { return inner_->state_terminal(s); }
  envs::CompactTransition model(int s, int a) const override {
    envs::CompactTransition t = inner_->model(s, a);
    t.reward = -t.reward;
    return t;
  }
  envs::Observation render_state(int s) const override { return inner_->render_state(s); }
  int decode_frame(const double* f) const override { return inner_->decode_frame(f); }

 private:
  std::unique_ptr<envs::Env> inner_;
};

}  // namespace

std::unique_ptr<Policy> train_adversarial_policy(envs::Env& env, const AdvReward& reward,
                                                 const agent::TrainerConfig& cfg) {
  if (reward.kind == AdvReward::Kind::FixedAction) {
    if (reward.fixed_action < 0 || reward.fixed_action >= env.actions()) {
      throw std::invalid_argument("adversarial policy: fixed action out of range");
    }
    return std::make_unique<ConstantPolicy>(reward.fixed_action);
  }
  NegatedRewardEnv adv_env(envs::make_env(env.spec()));
  agent::Trainer trainer(adv_env, cfg);
  trainer.run({});
  return std::make_unique<agent::PolicySnapshot>(trainer.net(), agent::NoiseMode::Mean, 0);
}

PolicyInductionAttacker::PolicyInductionAttacker(Policy& adv_policy,
                                                 const nets::Arch& assumed_arch,
                                                 const TrainTimeAttackConfig& cfg)
    : cfg_(cfg),
      adv_policy_(adv_policy),
      replica_(assumed_arch, cfg.replica, cfg.attacker_seed) {
  PerturbationBudget{cfg.lambda}.validate();
}

envs::Observation PolicyInductionAttacker::deliver_obs(const envs::Observation& clean,
                                                       bool terminal, std::int64_t) {
  pending_adv_action_ = -1;
  if (terminal) return clean;  // terminal states are never acted from, nor perturbed
  if (!triggered_) {
    ++ignored_pre_trigger_;
    return clean;
  }
  audit::AttackerScope scope;
  int a_adv = adv_policy_.act(clean);
  AdversarialExample ex = fgsm_targeted(replica_.crafting_net(), clean, a_adv, cfg_.lambda, cfg_.loss);
  pending_adv_action_ = a_adv;
  return ex.perturbed;
}

void PolicyInductionAttacker::on_action(std::int64_t, const envs::Observation&, int action) {
  if (pending_adv_action_ < 0) return;
  ++attacked_steps_;
  if (action == pending_adv_action_) ++induced_;
}

void PolicyInductionAttacker::on_transition(const agent::Transition& stored) {
  audit::AttackerScope scope;
  replica_.observe(stored);
}

void PolicyInductionAttacker::on_eval(std::int64_t step, double mean_return) {
  if (!triggered_ && mean_return >= cfg_.trigger_fraction * cfg_.oracle_optimal_return) {
    triggered_ = true;
    trigger_step_ = step;
  }
}

double PolicyInductionAttacker::success_rate() const {
  return attacked_steps_ ? static_cast<double>(induced_) / attacked_steps_ : 0.0;
}

TrainTimeAttackResult policy_induction_attack(envs::Env& env,
                                              const agent::TrainerConfig& target_cfg,
                                              const TrainTimeAttackConfig& cfg,
                                              const agent::RunHooks& hooks, Policy* adv_policy) {
  // Initialization phase: the adversarial policy and a randomly initialized
  // replica; both live entirely on attacker seed streams.
  std::unique_ptr<Policy> owned_policy;
  if (!adv_policy) {
    audit::AttackerScope scope;
    owned_policy = train_adversarial_policy(env, cfg.adv_reward, cfg.adv_trainer);
    adv_policy = owned_policy.get();
  }
  nets::Arch assumed;
  assumed.input = env.spec().obs_len();
  assumed.hidden = cfg.replica.trainer.hidden;
  assumed.output = static_cast<std::size_t>(env.actions());
  assumed.kind =
      cfg.replica.trainer.kind == agent::AgentKind::Noisy ? nets::Kind::Noisy : nets::Kind::Plain;
  PolicyInductionAttacker attacker(*adv_policy, assumed, cfg);

  agent::Trainer trainer(env, target_cfg);
  trainer.net().set_tag("target");

  agent::RunHooks wrapped = hooks;
  wrapped.interceptor = &attacker;
  auto inner_metrics = hooks.on_metrics;
  wrapped.on_metrics = [&](const harness::MetricsRecord& rec) {
    harness::MetricsRecord r = rec;
    r.attacked = true;
    if (attacker.triggered()) {
      r.has_attack_success = true;
      r.attack_success_rate = attacker.success_rate();
    }
    if (inner_metrics) inner_metrics(r);
  };

  TrainTimeAttackResult result;
  result.summary = trainer.run(wrapped);
  result.trigger_step = attacker.trigger_step();
  result.attack_success_rate = attacker.success_rate();
  result.attacked_steps = attacker.attacked_steps();
  return result;
}

}  // namespace noisyq::attacks

#include "noisyq/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace noisyq::agent {

void ReplayBuffer::push(Transition t) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);  // overwrite the oldest entry
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (data_.empty()) throw std::logic_error("ReplayBuffer::sample on empty buffer");
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    out.push_back(&data_[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(data_.size())))]);
  }
  return out;
}

std::string agent_kind_name(AgentKind k) {
  return k == AgentKind::EpsGreedy ? "eps_greedy" : "noisy";
}

AgentKind agent_kind_from_name(const std::string& name) {
  if (name == "eps_greedy" || name == "plain" || name == "dqn") return AgentKind::EpsGreedy;
  if (name == "noisy") return AgentKind::Noisy;
  throw std::invalid_argument("unknown agent kind '" + name + "'");
}

std::string noise_mode_name(NoiseMode m) { return m == NoiseMode::Sample ? "sample" : "mean"; }

NoiseMode noise_mode_from_name(const std::string& name) {
  if (name == "sample") return NoiseMode::Sample;
  if (name == "mean") return NoiseMode::Mean;
  throw std::invalid_argument("unknown noise mode '" + name + "'");
}

void TrainerConfig::validate() const {
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("TrainerConfig: gamma must be in [0,1)");
  if (sync_period < 1) throw std::invalid_argument("TrainerConfig: sync_period must be >= 1");
  if (batch < 1 || batch > capacity) {
    throw std::invalid_argument("TrainerConfig: batch must be in [1, capacity]");
  }
  if (lr < 0.0) throw std::invalid_argument("TrainerConfig: negative learning rate");
  if (total_steps < 0) throw std::invalid_argument("TrainerConfig: negative step count");
  if (eval_cadence < 1 || eval_episodes < 1) {
    throw std::invalid_argument("TrainerConfig: eval cadence and episodes must be >= 1");
  }
  if (hidden.empty()) throw std::invalid_argument("TrainerConfig: no hidden layers");
}

double clip_reward(double r) { return std::min(1.0, std::max(-1.0, r)); }

std::vector<double> compute_target(const std::vector<const Transition*>& batch,
                                   const nets::TargetNetwork& target, double gamma) {
  if (batch.empty()) throw std::invalid_argument("compute_target: empty batch");
  std::size_t n = batch.size();
  std::size_t width = batch[0]->s2.size();
  std::vector<double> flat;
  flat.reserve(n * width);
  for (const Transition* t : batch) {
    flat.insert(flat.end(), t->s2.begin(), t->s2.end());
  }
  Tensor q = target.qvalues(Tensor::matrix(n, width, std::move(flat)));
  std::vector<double> y(n);
  std::size_t actions = q.cols();
  for (std::size_t i = 0; i < n; ++i) {
    if (batch[i]->terminal) {
      y[i] = batch[i]->r;
    } else {
      double mx = q.at(i, 0);
      for (std::size_t a = 1; a < actions; ++a) mx = std::max(mx, q.at(i, a));
      y[i] = batch[i]->r + gamma * mx;
    }
  }
  return y;
}

double dqn_train_step(nets::QNetwork& net, nets::TargetNetwork& target, const ReplayBuffer& buffer,
                      const TrainerConfig& cfg, Rng& replay_rng, Rng& noise_rng,
                      Rng& target_noise_rng, std::int64_t& train_calls) {
  if (buffer.size() < static_cast<std::size_t>(cfg.batch)) {
    throw std::logic_error("dqn_train_step: buffer smaller than batch size");
  }
  auto batch = buffer.sample(static_cast<std::size_t>(cfg.batch), replay_rng);

  if (net.kind() == nets::Kind::Noisy) {
    net.sample_noise(noise_rng);  // one sample, held across the batch
    if (cfg.target_noise == nets::TargetNoiseMode::Resample) {
      target.resample_noise(target_noise_rng);
    }
  }

  std::vector<double> y = compute_target(batch, target, cfg.gamma);

  std::size_t width = batch[0]->s.size();
  std::vector<double> flat;
  flat.reserve(batch.size() * width);
  std::vector<int> actions;
  actions.reserve(batch.size());
  for (const Transition* t : batch) {
    flat.insert(flat.end(), t->s.begin(), t->s.end());
    actions.push_back(t->a);
  }

  ad::Graph g;
  ad::NodeId obs = g.leaf(Tensor::matrix(batch.size(), width, std::move(flat)));
  nets::ForwardRecord rec;
  ad::NodeId q = net.forward(g, obs, &rec);
  ad::NodeId pred = g.select_actions(q, std::move(actions));
  ad::NodeId loss = g.squared_error(pred, Tensor::vector(std::move(y)));
  double loss_value = g.value(loss)[0];

  if (cfg.lr != 0.0) {
    auto grads = g.backward(loss);
    nets::sgd_update(net, grads, rec, cfg.lr);
  }

  ++train_calls;
  if (train_calls % cfg.sync_period == 0) {
    target.sync_from(net, target_noise_rng);
  }
  return loss_value;
}

PolicySnapshot::PolicySnapshot(nets::QNetwork net, NoiseMode mode, std::uint64_t noise_seed)
    : net_(std::move(net)), mode_(mode), noise_rng_(noise_seed, "snapshot-noise") {
  if (mode_ == NoiseMode::Mean) net_.zero_noise();
}

void PolicySnapshot::begin_step() {
  if (mode_ == NoiseMode::Sample) net_.sample_noise(noise_rng_);
}

double EvalResult::mean() const {
  double s = 0.0;
  for (double r : returns) s += r;
  return returns.empty() ? 0.0 : s / static_cast<double>(returns.size());
}

double EvalResult::min() const {
  return returns.empty() ? 0.0 : *std::min_element(returns.begin(), returns.end());
}

double EvalResult::max() const {
  return returns.empty() ? 0.0 : *std::max_element(returns.begin(), returns.end());
}

double EvalResult::stderr_mean() const {
  if (returns.size() < 2) return 0.0;
  double m = mean();
  double ss = 0.0;
  for (double r : returns) ss += (r - m) * (r - m);
  double var = ss / static_cast<double>(returns.size() - 1);
  return std::sqrt(var / static_cast<double>(returns.size()));
}

EvalResult evaluate_policy(Policy& policy, envs::Env& env, int episodes,
                           std::uint64_t seed_base, Perturber* perturber) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
  EvalResult out;
  out.returns.reserve(static_cast<std::size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    envs::Observation obs =
        env.reset(detail::splitmix64(seed_base + static_cast<std::uint64_t>(ep)));
    double ret = 0.0;
    while (!env.done()) {
      policy.begin_step();
      envs::Observation used = perturber ? perturber->perturb(obs) : obs;
      int action = policy.act_current(used);
      if (perturber) perturber->after_action(action);
      envs::StepResult r = env.step(action);
      ret += r.reward;
      obs = std::move(r.obs);
      ++out.steps;
    }
    out.returns.push_back(ret);
  }
  return out;
}

Trainer::Trainer(envs::Env& env, TrainerConfig cfg)
    : env_(env),
      cfg_(std::move(cfg)),
      buffer_(1),
      env_rng_(cfg_.seed, "env"),
      action_rng_(cfg_.seed, "action"),
      noise_rng_(cfg_.seed, "noise"),
      target_noise_rng_(cfg_.seed, "target-noise"),
      replay_rng_(cfg_.seed, "replay") {
  cfg_.validate();
  buffer_ = ReplayBuffer(static_cast<std::size_t>(cfg_.capacity));
  nets::Arch arch;
  arch.input = env.spec().obs_len();
  arch.hidden = cfg_.hidden;
  arch.output = static_cast<std::size_t>(env.actions());
  arch.kind = cfg_.kind == AgentKind::Noisy ? nets::Kind::Noisy : nets::Kind::Plain;
  Rng init_rng(cfg_.seed, "init");
  net_ = nets::QNetwork::init(arch, init_rng);
  target_ = nets::TargetNetwork(net_, target_noise_rng_);
  eval_seed_base_ = substream_seed(cfg_.seed, "eval");
  snapshot_noise_seed_ = substream_seed(cfg_.seed, "eval-noise");
}

int Trainer::select_action(const envs::Observation& obs, std::int64_t step) {
  if (cfg_.kind == AgentKind::Noisy) {
    net_.sample_noise(noise_rng_);
    return net_.greedy_action(obs);
  }
  double eps = cfg_.eps.at(step);
  if (action_rng_.uniform() < eps) {
    ++random_actions_;
    return action_rng_.uniform_int(env_.actions());
  }
  return net_.greedy_action(obs);
}

double Trainer::train_step() {
  return dqn_train_step(net_, target_, buffer_, cfg_, replay_rng_, noise_rng_,
                        target_noise_rng_, train_calls_);
}

PolicySnapshot Trainer::snapshot() const {
  return PolicySnapshot(net_, cfg_.kind == AgentKind::Noisy ? cfg_.eval_noise : NoiseMode::Mean,
                        snapshot_noise_seed_);
}

RunSummary Trainer::run(const RunHooks& hooks) {
  RunSummary summary;
  auto eval_env = envs::make_env(env_.spec());
  auto deliver = [&](const envs::Observation& clean, bool terminal,
                     std::int64_t step) -> envs::Observation {
    if (!hooks.interceptor) return clean;
    envs::Observation seen = hooks.interceptor->deliver_obs(clean, terminal, step);
    return terminal ? clean : seen;
  };

  auto run_eval = [&](std::int64_t step, double loss, bool has_loss) {
    PolicySnapshot snap = snapshot();
    EvalResult res = evaluate_policy(snap, *eval_env, cfg_.eval_episodes,
                                     detail::splitmix64(eval_seed_base_ ^ static_cast<std::uint64_t>(step)));
    summary.eval_curve.push_back({step, res.mean()});
    summary.final_eval_mean = res.mean();
    if (hooks.interceptor) hooks.interceptor->on_eval(step, res.mean());
    if (hooks.on_metrics) {
      harness::MetricsRecord rec;
      rec.run_id = hooks.run_id;
      rec.seed = cfg_.seed;
      rec.agent_kind = agent_kind_name(cfg_.kind);
      rec.env_name = env_.spec().name;
      rec.step = step;
      rec.eval_episodes = cfg_.eval_episodes;
      rec.mean_return = res.mean();
      rec.min_return = res.min();
      rec.max_return = res.max();
      rec.stderr_return = res.stderr_mean();
      rec.td_loss = loss;
      rec.has_td_loss = has_loss;
      if (cfg_.kind == AgentKind::EpsGreedy) {
        rec.epsilon = cfg_.eps.at(step);
        rec.has_epsilon = true;
      } else {
        rec.noise_mode = noise_mode_name(cfg_.eval_noise);
      }
      hooks.on_metrics(rec);
    }
    if (hooks.on_checkpoint) hooks.on_checkpoint(net_, step, false);
    return res.mean();
  };

  envs::Observation obs = deliver(env_.reset(env_rng_.next_u64()), false, 0);
  double last_loss = 0.0;
  bool has_loss = false;
  for (std::int64_t step = 1; step <= cfg_.total_steps; ++step) {
    int action = select_action(obs, step);
    if (hooks.interceptor) hooks.interceptor->on_action(step, obs, action);

    envs::StepResult sr = env_.step(action);
    envs::Observation next = deliver(sr.obs, sr.terminal, step);

    Transition t{obs, action, clip_reward(sr.reward), next, sr.terminal};
    buffer_.push(t);
    if (hooks.interceptor) hooks.interceptor->on_transition(t);

    if (sr.terminal) {
      ++summary.episodes_seen;
      obs = deliver(env_.reset(env_rng_.next_u64()), false, step);
    } else {
      obs = std::move(next);
    }

    if (step >= cfg_.learn_start && buffer_.size() >= static_cast<std::size_t>(cfg_.batch)) {
      last_loss = train_step();
      has_loss = true;
    }

    if (step % cfg_.eval_cadence == 0) {
      double mean = run_eval(step, last_loss, has_loss);
      if (hooks.early_stop_return && mean >= *hooks.early_stop_return) {
        summary.early_stopped = true;
        summary.steps_run = step;
        break;
      }
    }
    summary.steps_run = step;
  }

  if (summary.eval_curve.empty() && cfg_.total_steps == 0) {
    // Nothing ran; callers still get a defined summary.
    summary.final_eval_mean = 0.0;
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(net_, summary.steps_run, true);
  return summary;
}

}  // namespace noisyq::agent

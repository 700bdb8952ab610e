#include "noisyq/value_iteration.hpp"

#include <cmath>
#include <stdexcept>

#include "noisyq/rng.hpp"

namespace noisyq::envs {

ValueIterationResult optimal_values(const Env& env, double gamma, double tol,
                                    int enumeration_cap) {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw std::invalid_argument("optimal_values: gamma must be in [0,1)");
  }
  int n = env.state_count();
  if (n > enumeration_cap) {
    throw std::invalid_argument("optimal_values: state space of " + std::to_string(n) +
                                " exceeds enumeration cap " + std::to_string(enumeration_cap));
  }
  int actions = env.actions();

  // Precompute the deterministic transition table once.
  std::vector<CompactTransition> table(static_cast<std::size_t>(n) * actions);
  std::vector<char> terminal(n);
  for (int s = 0; s < n; ++s) {
    terminal[s] = env.state_terminal(s) ? 1 : 0;
    if (terminal[s]) continue;
    for (int a = 0; a < actions; ++a) {
      table[static_cast<std::size_t>(s) * actions + a] = env.model(s, a);
    }
  }

  ValueIterationResult out;
  out.values.assign(n, 0.0);
  out.policy.assign(n, -1);
  std::vector<double> next(n, 0.0);

  const int max_sweeps = 1000000;
  for (out.iterations = 1; out.iterations <= max_sweeps; ++out.iterations) {
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
      if (terminal[s]) continue;
      double best = -1e300;
      for (int a = 0; a < actions; ++a) {
        const CompactTransition& t = table[static_cast<std::size_t>(s) * actions + a];
        double v = t.reward + (t.terminal ? 0.0 : gamma * out.values[t.next_state]);
        if (v > best) best = v;
      }
      next[s] = best;
      residual = std::max(residual, std::fabs(best - out.values[s]));
    }
    out.values.swap(next);
    out.residual = residual;
    if (residual < tol) break;
  }

  for (int s = 0; s < n; ++s) {
    if (terminal[s]) continue;
    double best = -1e300;
    int best_a = 0;
    for (int a = 0; a < actions; ++a) {
      const CompactTransition& t = table[static_cast<std::size_t>(s) * actions + a];
      double v = t.reward + (t.terminal ? 0.0 : gamma * out.values[t.next_state]);
      if (v > best) {  // strict: ties keep the lowest action index
        best = v;
        best_a = a;
      }
    }
    out.policy[s] = best_a;
  }
  return out;
}

double oracle_mean_return(Env& env, const ValueIterationResult& vi, int episodes,
                          std::uint64_t seed_base) {
  OraclePolicy policy(env, vi);
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    Observation obs = env.reset(detail::splitmix64(seed_base + static_cast<std::uint64_t>(ep)));
    double ret = 0.0;
    while (!env.done()) {
      StepResult r = env.step(policy.act(obs));
      ret += r.reward;
      obs = r.obs;
    }
    total += ret;
  }
  return total / episodes;
}

double oracle_discounted_rollout(Env& env, const ValueIterationResult& vi, double gamma,
                                 std::uint64_t episode_seed, double* start_value) {
  OraclePolicy policy(env, vi);
  Observation obs = env.reset(episode_seed);
  if (start_value) *start_value = vi.values[static_cast<std::size_t>(env.current_state())];
  double ret = 0.0;
  double discount = 1.0;
  while (!env.done()) {
    StepResult r = env.step(policy.act(obs));
    ret += discount * r.reward;
    discount *= gamma;
    obs = r.obs;
  }
  return ret;
}

std::vector<Observation> sample_states(const Env& env, int count, std::uint64_t seed) {
  std::vector<int> live;
  for (int s = 0; s < env.state_count(); ++s) {
    if (!env.state_terminal(s)) live.push_back(s);
  }
  if (live.empty()) throw std::logic_error("sample_states: no non-terminal states");
  Rng rng(seed, "state-sample");
  std::vector<Observation> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    out.push_back(env.render_state(live[rng.uniform_int(static_cast<int>(live.size()))]));
  }
  return out;
}

}  // namespace noisyq::envs

#pragma once

#include <cstdint>
#include <vector>

#include "noisyq/env.hpp"
#include "noisyq/policy.hpp"

namespace noisyq::envs {

struct ValueIterationResult {
  std::vector<double> values;  // per compact state; 0 for terminal states
  std::vector<int> policy;     // greedy action per state; -1 for terminal states
  int iterations = 0;
  double residual = 0.0;
};

/// Exact optimal values and greedy policy by value iteration over the env's
/// compact state space, converged to sup-norm residual below `tol`. Greedy
/// ties break to the lowest action index, matching the agent's argmax rule.
ValueIterationResult optimal_values(const Env& env, double gamma, double tol = 1e-10,
                                    int enumeration_cap = 200000);

/// pi* as a Policy: decodes the current frame of the observation back to the
/// compact state and plays the oracle's greedy action.
class OraclePolicy final : public Policy {
 public:
  OraclePolicy(const Env& env, const ValueIterationResult& vi) : env_(env), vi_(vi) {}
  int act_current(const Observation& obs) override {
    std::size_t cells = obs.size() / 2;
    int state = env_.decode_frame(obs.data() + cells);
    return vi_.policy[static_cast<std::size_t>(state)];
  }

 private:
  const Env& env_;
  const ValueIterationResult& vi_;
};

/// Undiscounted mean episode return of the oracle policy over seeded
/// episodes. This is the "optimal score" agents are measured against.
double oracle_mean_return(Env& env, const ValueIterationResult& vi, int episodes,
                          std::uint64_t seed_base);

/// Discounted return of one greedy oracle rollout from a seeded start; equals
/// the oracle's start-state value for these deterministic environments.
double oracle_discounted_rollout(Env& env, const ValueIterationResult& vi, double gamma,
                                 std::uint64_t episode_seed, double* start_value = nullptr);

/// Uniform sample of non-terminal compact states rendered as standing
/// observations; the shared pool for transferability measurements.
std::vector<Observation> sample_states(const Env& env, int count, std::uint64_t seed);

}  // namespace noisyq::envs

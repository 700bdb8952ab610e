#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "noisyq/env.hpp"
#include "noisyq/rng.hpp"
#include "noisyq/value_iteration.hpp"

using namespace noisyq;
using envs::EnvSpec;
using envs::Observation;

namespace {

int count_value(const Observation& obs, std::size_t offset, std::size_t cells, double v) {
  int n = 0;
  for (std::size_t i = 0; i < cells; ++i) n += obs[offset + i] == v;
  return n;
}

}  // namespace

TEST_CASE("reset is seed-deterministic and renders the documented layout") {
  auto env = envs::make_env(EnvSpec::preset("grid_pursuit"));
  Observation a = env->reset(42);
  Observation b = env->reset(42);
  CHECK(a == b);
  CHECK(a.size() == 2 * 8 * 8);

  std::size_t cells = 64;
  for (std::size_t frame = 0; frame < 2; ++frame) {
    CHECK(count_value(a, frame * cells, cells, 1.0) == 1);
    CHECK(count_value(a, frame * cells, cells, 0.5) == 1);
    CHECK(count_value(a, frame * cells, cells, 0.0) == static_cast<int>(cells) - 2);
  }
  // stacked frames are equal right after reset
  for (std::size_t i = 0; i < cells; ++i) CHECK(a[i] == a[cells + i]);

  auto cat = envs::make_env(EnvSpec::preset("catcher"));
  Observation c = cat->reset(7);
  CHECK(c.size() == 2 * 8 * 10);
  // object in the top row, paddle in the bottom row
  int top_obj = count_value(c, 0, 8, 0.5);
  int bottom_paddle = count_value(c, 9 * 8, 8, 1.0);
  CHECK(top_obj == 1);
  CHECK(bottom_paddle == 1);
}

TEST_CASE("step rules and error paths") {
  auto env = envs::make_env(EnvSpec::preset("grid_pursuit"));
  env->reset(3);
  CHECK_THROWS_AS(env->step(4), std::invalid_argument);
  CHECK_THROWS_AS(env->step(-1), std::invalid_argument);

  // in-play steps pay -0.01 until a catch pays +1 and terminates
  bool caught = false;
  double last_reward = 0.0;
  for (int i = 0; i < 200 && !env->done(); ++i) {
    int state = env->current_state();
    int action = 0;
    // chase: follow the oracle so the episode ends with a catch
    static auto vi = envs::optimal_values(*env, 0.99);
    action = vi.policy[static_cast<std::size_t>(state)];
    auto r = env->step(action);
    last_reward = r.reward;
    if (!r.terminal) CHECK(r.reward == -0.01);
    caught = r.terminal;
  }
  CHECK(caught);
  CHECK(last_reward == 1.0);
  CHECK_THROWS_AS(env->step(0), std::logic_error);
}

TEST_CASE("catcher pays +1 under the object and -1 otherwise, both terminal") {
  auto env = envs::make_env(EnvSpec::preset("catcher"));
  auto vi = envs::optimal_values(*env, 0.99);

  env->reset(11);
  envs::OraclePolicy oracle(*env, vi);
  Observation obs = env->reset(11);
  double total = 0.0;
  int steps = 0;
  while (!env->done()) {
    auto r = env->step(oracle.act(obs));
    total += r.reward;
    obs = r.obs;
    ++steps;
  }
  CHECK(total == 1.0);  // always catchable on the default board
  CHECK(steps == 9);    // object falls height-1 rows

  // a paddle pinned to the left misses objects far to the right
  env->reset(11);
  bool missed = false;
  double reward = 0.0;
  for (int ep = 0; ep < 50 && !missed; ++ep) {
    env->reset(static_cast<std::uint64_t>(ep));
    while (!env->done()) {
      auto r = env->step(0);
      reward = r.reward;
    }
    missed = reward == -1.0;
  }
  CHECK(missed);
}

TEST_CASE("episode cap terminates grid_pursuit episodes") {
  EnvSpec spec = EnvSpec::preset("grid_pursuit");
  auto env = envs::make_env(spec);
  env->reset(1);
  int steps = 0;
  bool terminal = false;
  double final_reward = 0.0;
  while (!env->done() && steps < spec.episode_cap + 10) {
    // oscillate without catching: up, down, up, down ...
    auto r = env->step(steps % 2 == 0 ? 0 : 1);
    terminal = r.terminal;
    final_reward = r.reward;
    ++steps;
  }
  if (steps == spec.episode_cap) {
    CHECK(terminal);
    CHECK((final_reward == -0.01 || final_reward == 1.0));
  }
  CHECK(steps <= spec.episode_cap);
}

TEST_CASE("observations decode back to the compact state") {
  for (const char* name : {"grid_pursuit", "catcher"}) {
    auto env = envs::make_env(EnvSpec::preset(name));
    Rng rng(99);
    int checked = 0;
    for (int s = 0; s < env->state_count(); ++s) {
      if (env->state_terminal(s)) continue;
      Observation obs = env->render_state(s);
      std::size_t cells = obs.size() / 2;
      CHECK(env->decode_frame(obs.data() + cells) == s);
      ++checked;
    }
    CHECK(checked > 100);
  }
}

TEST_CASE("dynamics are (seed, action sequence) deterministic with bounded rewards") {
  auto env1 = envs::make_env(EnvSpec::preset("grid_pursuit"));
  auto env2 = envs::make_env(EnvSpec::preset("grid_pursuit"));
  Rng rng(5);
  for (int ep = 0; ep < 5; ++ep) {
    Observation a = env1->reset(1000 + ep);
    Observation b = env2->reset(1000 + ep);
    CHECK(a == b);
    while (!env1->done()) {
      int action = rng.uniform_int(4);
      auto ra = env1->step(action);
      auto rb = env2->step(action);
      CHECK(ra.obs == rb.obs);
      CHECK(ra.reward == rb.reward);
      CHECK(ra.terminal == rb.terminal);
      CHECK(ra.reward >= -1.0);
      CHECK(ra.reward <= 1.0);
    }
  }
}

TEST_CASE("value iteration: gamma zero, terminal-adjacent states, residual") {
  auto env = envs::make_env(EnvSpec::preset("grid_pursuit"));
  auto vi0 = envs::optimal_values(*env, 0.0);
  CHECK(vi0.residual < 1e-10);
  int plus_one = 0;
  for (int s = 0; s < env->state_count(); ++s) {
    if (env->state_terminal(s)) continue;
    double best = -1e300;
    for (int a = 0; a < env->actions(); ++a) best = std::max(best, env->model(s, a).reward);
    CHECK(vi0.values[static_cast<std::size_t>(s)] == best);  // gamma = 0: max immediate reward
    if (best == 1.0) ++plus_one;
  }
  CHECK(plus_one > 0);

  // terminal-adjacent states keep value exactly +1 at any gamma
  auto vi = envs::optimal_values(*env, 0.99);
  CHECK(vi.residual < 1e-10);
  for (int s = 0; s < env->state_count(); ++s) {
    if (env->state_terminal(s)) continue;
    if (vi0.values[static_cast<std::size_t>(s)] == 1.0) {
      CHECK(vi.values[static_cast<std::size_t>(s)] == 1.0);
    }
  }

  CHECK_THROWS_AS(envs::optimal_values(*env, 0.99, 1e-10, 10), std::invalid_argument);
  CHECK_THROWS_AS(envs::optimal_values(*env, 1.0), std::invalid_argument);
}

TEST_CASE("greedy oracle rollouts reproduce the start-state value") {
  for (const char* name : {"grid_pursuit", "catcher"}) {
    auto env = envs::make_env(EnvSpec::preset(name));
    double gamma = 0.99;
    auto vi = envs::optimal_values(*env, gamma);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      double start_value = 0.0;
      double rollout = envs::oracle_discounted_rollout(*env, vi, gamma, seed, &start_value);
      CHECK(std::fabs(rollout - start_value) < 1e-9);
    }
  }
}

TEST_CASE("oracle mean return is high on both default environments") {
  auto grid = envs::make_env(EnvSpec::preset("grid_pursuit"));
  auto vi = envs::optimal_values(*grid, 0.99);
  double grid_mean = envs::oracle_mean_return(*grid, vi, 100, 77);
  CHECK(grid_mean > 0.85);
  CHECK(grid_mean <= 1.0);

  auto cat = envs::make_env(EnvSpec::preset("catcher"));
  auto vic = envs::optimal_values(*cat, 0.99);
  double cat_mean = envs::oracle_mean_return(*cat, vic, 100, 77);
  CHECK(cat_mean == 1.0);
}

TEST_CASE("spec validation rejects bad geometry") {
  EnvSpec s = EnvSpec::preset("grid_pursuit");
  s.width = 3;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  EnvSpec c = EnvSpec::preset("catcher");
  c.episode_cap = 5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  EnvSpec p = EnvSpec::preset("grid_pursuit");
  p.patrol_len = 40;  // ring would not fit an 8x8 board
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_THROWS_AS(EnvSpec::preset("pong"), std::invalid_argument);
}

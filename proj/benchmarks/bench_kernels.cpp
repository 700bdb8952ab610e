// Compares the serial reference kernels against the OpenMP entry points and
// times a full training step at both thread counts. Also verifies that the
// parallel results are bit-identical to the serial ones at every size.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "noisyq/agent.hpp"
#include "noisyq/env.hpp"
#include "noisyq/kernels.hpp"
#include "noisyq/rng.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void bench_matmul(std::size_t n, int reps) {
  noisyq::Rng rng(42);
  std::vector<double> a(n * n), b(n * n), c_serial(n * n), c_par(n * n);
  for (double& v : a) v = rng.uniform(-1, 1);
  for (double& v : b) v = rng.uniform(-1, 1);

  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    noisyq::kern::matmul_serial(a.data(), b.data(), c_serial.data(), n, n, n);
  }
  double serial_s = seconds_since(t0) / reps;

  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    noisyq::kern::matmul(a.data(), b.data(), c_par.data(), n, n, n);
  }
  double par_s = seconds_since(t0) / reps;

  bool identical = std::memcmp(c_serial.data(), c_par.data(), n * n * sizeof(double)) == 0;
  double gflops = 2.0 * n * n * n / 1e9;
  std::printf("matmul %4zu x %-4zu  serial %8.3f ms (%5.2f GF/s)  omp %8.3f ms (%5.2f GF/s)  "
              "speedup %.2fx  bit-identical %s\n",
              n, n, serial_s * 1e3, gflops / serial_s, par_s * 1e3, gflops / par_s,
              serial_s / par_s, identical ? "yes" : "NO");
}

double bench_train_steps(int steps) {
  auto env = noisyq::envs::make_env(noisyq::envs::EnvSpec::preset("grid_pursuit"));
  noisyq::agent::TrainerConfig cfg;
  cfg.total_steps = steps;
  cfg.learn_start = 100;
  cfg.eval_cadence = steps + 1;  // no eval inside the timing loop
  cfg.eval_episodes = 1;
  cfg.seed = 7;
  noisyq::agent::Trainer trainer(*env, cfg);
  auto t0 = Clock::now();
  trainer.run({});
  return seconds_since(t0);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP: %d threads available\n", omp_get_max_threads());
#else
  std::printf("OpenMP: compiled out, parallel entry points run serial\n");
#endif

  bench_matmul(64, 200);
  bench_matmul(128, 100);
  bench_matmul(256, 20);
  bench_matmul(512, 5);
  bench_matmul(1024, 2);

  const int steps = 3000;
  double t = bench_train_steps(steps);
  std::printf("trainer: %d env+replay steps in %.2f s (%.0f steps/s)\n", steps, t, steps / t);
  return 0;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "noisyq/kernels.hpp"
#include "noisyq/rng.hpp"

using namespace noisyq;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-3, 3);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

TEST_CASE("parallel matmul is bit-identical to the serial reference") {
  Rng rng(1);
  // sizes straddling the parallel threshold
  for (std::size_t n : {3u, 17u, 33u, 64u, 96u, 128u}) {
    std::size_t m = n + 1, k = n + 2;
    auto a = random_vec(m * k, rng);
    auto b = random_vec(k * n, rng);
    std::vector<double> c1(m * n), c2(m * n);
    kern::matmul_serial(a.data(), b.data(), c1.data(), m, k, n);
    kern::matmul(a.data(), b.data(), c2.data(), m, k, n);
    CHECK(same_bits(c1, c2));
  }
}

TEST_CASE("parallel elementwise kernels are bit-identical to serial") {
  Rng rng(2);
  for (std::size_t n : {1u, 100u, 70000u}) {
    auto a = random_vec(n, rng);
    auto b = random_vec(n, rng);
    std::vector<double> s(n), p(n);

    kern::add_serial(a.data(), b.data(), s.data(), n);
    kern::add(a.data(), b.data(), p.data(), n);
    CHECK(same_bits(s, p));

    kern::mul_serial(a.data(), b.data(), s.data(), n);
    kern::mul(a.data(), b.data(), p.data(), n);
    CHECK(same_bits(s, p));

    kern::relu_serial(a.data(), s.data(), n);
    kern::relu(a.data(), p.data(), n);
    CHECK(same_bits(s, p));

    kern::relu_backward_serial(a.data(), b.data(), s.data(), n);
    kern::relu_backward(a.data(), b.data(), p.data(), n);
    CHECK(same_bits(s, p));

    std::vector<double> ys = b, yp = b;
    kern::axpy_serial(-0.37, a.data(), ys.data(), n);
    kern::axpy(-0.37, a.data(), yp.data(), n);
    CHECK(same_bits(ys, yp));
  }
}

TEST_CASE("parallel matrix helpers are bit-identical to serial") {
  Rng rng(3);
  for (auto [rows, cols] : std::vector<std::pair<std::size_t, std::size_t>>{
           {2, 3}, {50, 41}, {300, 301}}) {
    auto x = random_vec(rows * cols, rng);
    auto bias = random_vec(cols, rng);
    std::vector<double> s(rows * cols), p(rows * cols);

    kern::add_bias_serial(x.data(), bias.data(), s.data(), rows, cols);
    kern::add_bias(x.data(), bias.data(), p.data(), rows, cols);
    CHECK(same_bits(s, p));

    std::vector<double> ts(rows * cols), tp(rows * cols);
    kern::transpose_serial(x.data(), ts.data(), rows, cols);
    kern::transpose(x.data(), tp.data(), rows, cols);
    CHECK(same_bits(ts, tp));

    std::vector<double> cs(cols), cp(cols);
    kern::col_sum_serial(x.data(), cs.data(), rows, cols);
    kern::col_sum(x.data(), cp.data(), rows, cols);
    CHECK(same_bits(cs, cp));
  }
}

TEST_CASE("transpose of transpose is the identity") {
  Rng rng(4);
  std::size_t rows = 7, cols = 13;
  auto x = random_vec(rows * cols, rng);
  std::vector<double> t(rows * cols), back(rows * cols);
  kern::transpose(x.data(), t.data(), rows, cols);
  kern::transpose(t.data(), back.data(), cols, rows);
  CHECK(same_bits(x, back));
}

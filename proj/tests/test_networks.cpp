#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "noisyq/network.hpp"
#include "noisyq/rng.hpp"

using namespace noisyq;
using nets::Arch;
using nets::Kind;
using nets::QNetwork;

namespace {

Arch small_arch(Kind kind, std::size_t input = 6, std::vector<std::size_t> hidden = {8, 8},
                std::size_t output = 3) {
  Arch a;
  a.input = input;
  a.hidden = std::move(hidden);
  a.output = output;
  a.kind = kind;
  return a;
}

void zero_sigma(QNetwork& net) {
  for (auto& layer : net.layers()) {
    auto& noisy = std::get<nets::NoisyLinearLayer>(layer);
    noisy.sigma_W = Tensor::zeros(noisy.sigma_W.shape());
    noisy.sigma_b = Tensor::zeros(noisy.sigma_b.shape());
  }
}

}  // namespace

TEST_CASE("plain forward basics") {
  Rng rng(0);
  QNetwork net = QNetwork::init(small_arch(Kind::Plain), rng);
  for (auto& [name, t] : net.named_parameters()) {
    *t = Tensor::zeros(t->shape());
  }
  std::vector<double> obs(6, 0.33);
  auto q = net.qvalues_row(obs);
  for (double v : q) CHECK(v == 0.0);

  // 1x1 net: W=[[2]], b=[1], obs=[3] -> Q = 7
  Arch tiny;
  tiny.input = 1;
  tiny.hidden = {1};
  tiny.output = 1;
  tiny.kind = Kind::Plain;
  Rng rng2(1);
  QNetwork one = QNetwork::init(tiny, rng2);
  // single hidden layer: set it to the identity so the output layer is 2x+1
  *one.param(0, nets::ParamRole::W) = Tensor::matrix(1, 1, {1});
  *one.param(0, nets::ParamRole::B) = Tensor::vector({0});
  *one.param(1, nets::ParamRole::W) = Tensor::matrix(1, 1, {2});
  *one.param(1, nets::ParamRole::B) = Tensor::vector({1});
  CHECK(one.qvalues_row({3})[0] == 7.0);

  CHECK_THROWS_AS(net.qvalues_row({1, 2, 3}), std::invalid_argument);
}

TEST_CASE("noisy net with zero sigma collapses to the plain mu network exactly") {
  Rng rng(42);
  QNetwork noisy = QNetwork::init(small_arch(Kind::Noisy), rng);
  zero_sigma(noisy);

  Rng noise_rng(7);
  noisy.sample_noise(noise_rng);

  // plain twin carrying the mu parameters
  Rng rng2(43);
  QNetwork plain = QNetwork::init(small_arch(Kind::Plain), rng2);
  for (std::size_t l = 0; l < plain.layers().size(); ++l) {
    auto& nl = std::get<nets::NoisyLinearLayer>(noisy.layers()[l]);
    *plain.param(static_cast<int>(l), nets::ParamRole::W) = nl.mu_W;
    *plain.param(static_cast<int>(l), nets::ParamRole::B) = nl.mu_b;
  }

  Rng obs_rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> obs(6);
    for (double& v : obs) v = obs_rng.uniform(0, 1);
    auto qa = noisy.qvalues_row(obs);
    auto qb = plain.qvalues_row(obs);
    for (std::size_t i = 0; i < qa.size(); ++i) CHECK(qa[i] == qb[i]);
  }

  // outputs unchanged by resampling when sigma stays zero
  auto before = noisy.qvalues_row(std::vector<double>(6, 0.5));
  noisy.sample_noise(noise_rng);
  auto after = noisy.qvalues_row(std::vector<double>(6, 0.5));
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("sample_noise determinism and plain no-op") {
  Rng rng(3);
  QNetwork a = QNetwork::init(small_arch(Kind::Noisy), rng);
  QNetwork b = a;
  Rng na(123), nb(123);
  CHECK(a.sample_noise(na));
  CHECK(b.sample_noise(nb));
  auto pa = a.named_parameters();
  auto pb = b.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].second->bit_equal(*pb[i].second));
  }

  Rng rng2(4);
  QNetwork plain = QNetwork::init(small_arch(Kind::Plain), rng2);
  QNetwork plain_copy = plain;
  Rng np(9);
  CHECK_FALSE(plain.sample_noise(np));
  auto pp = plain.named_parameters();
  auto pc = plain_copy.named_parameters();
  for (std::size_t i = 0; i < pp.size(); ++i) CHECK(pp[i].second->bit_equal(*pc[i].second));
}

TEST_CASE("factor noise is rank one and zero mean") {
  Rng rng(8);
  QNetwork net = QNetwork::init(small_arch(Kind::Noisy, 5, {4}, 3), rng);
  Rng noise(17);

  // every 2x2 minor of eps_W vanishes (exact rank-1 outer product)
  for (int rep = 0; rep < 20; ++rep) {
    net.sample_noise(noise);
    const auto& layer = std::get<nets::NoisyLinearLayer>(net.layers()[0]);
    Tensor ew = layer.eps_weight();
    for (std::size_t i = 0; i + 1 < ew.rows(); ++i) {
      for (std::size_t j = 0; j + 1 < ew.cols(); ++j) {
        double minor = ew.at(i, j) * ew.at(i + 1, j + 1) - ew.at(i, j + 1) * ew.at(i + 1, j);
        CHECK(std::fabs(minor) < 1e-12);
      }
    }
  }

  // Monte-Carlo oracle: f is sign-symmetric, so eps_W entries have zero mean
  double sum = 0.0;
  std::int64_t count = 0;
  Rng mc(99);
  for (int rep = 0; rep < 100000 / 20; ++rep) {
    net.sample_noise(mc);
    const auto& layer = std::get<nets::NoisyLinearLayer>(net.layers()[0]);
    Tensor ew = layer.eps_weight();
    for (std::size_t i = 0; i < ew.numel(); ++i) {
      sum += ew[i];
      ++count;
    }
  }
  CHECK(count >= 100000);
  CHECK(std::fabs(sum / static_cast<double>(count)) < 0.01);
}

TEST_CASE("initialization bounds and sigma formula") {
  Arch a = small_arch(Kind::Plain, 4, {4}, 2);
  Rng rng(12);
  QNetwork net = QNetwork::init(a, rng);
  for (auto& [name, t] : net.named_parameters()) {
    double bound = name.find("layer0") != std::string::npos ? 1.0 / std::sqrt(4.0)
                                                            : 1.0 / std::sqrt(4.0);
    for (std::size_t i = 0; i < t->numel(); ++i) CHECK(std::fabs((*t)[i]) <= bound);
  }

  Arch an = small_arch(Kind::Noisy, 4, {4}, 2);
  Rng rng2(12);
  QNetwork noisy = QNetwork::init(an, rng2);
  for (auto& layer : noisy.layers()) {
    const auto& nl = std::get<nets::NoisyLinearLayer>(layer);
    for (std::size_t i = 0; i < nl.sigma_W.numel(); ++i) CHECK(nl.sigma_W[i] == 0.25);
    for (std::size_t i = 0; i < nl.sigma_b.numel(); ++i) CHECK(nl.sigma_b[i] == 0.25);
  }

  // same seed, same network
  Rng ra(77), rb(77);
  QNetwork na = QNetwork::init(an, ra);
  QNetwork nb = QNetwork::init(an, rb);
  auto pa = na.named_parameters();
  auto pb = nb.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second->bit_equal(*pb[i].second));

  Arch bad;
  bad.input = 4;
  bad.hidden = {0};
  bad.output = 2;
  Rng rz(1);
  CHECK_THROWS_AS(QNetwork::init(bad, rz), std::invalid_argument);
}

TEST_CASE("gradients flow into both mu and sigma") {
  Rng rng(21);
  QNetwork net = QNetwork::init(small_arch(Kind::Noisy, 5, {6}, 3), rng);
  ad::Graph g;
  Tensor obs = Tensor::zeros({2, 5});
  Rng orng(2);
  for (std::size_t i = 0; i < obs.numel(); ++i) obs[i] = orng.uniform(0.1, 1.0);
  auto x = g.leaf(obs);
  nets::ForwardRecord rec;
  auto q = net.forward(g, x, &rec);
  auto loss = g.squared_error(g.select_actions(q, {0, 2}), Tensor::vector({1.0, -1.0}));
  auto grads = g.backward(loss);

  double mu_norm = 0.0, sigma_norm = 0.0;
  for (const auto& p : rec.params) {
    const Tensor& grad = grads[static_cast<std::size_t>(p.node)];
    double n = 0.0;
    for (std::size_t i = 0; i < grad.numel(); ++i) n += grad[i] * grad[i];
    if (p.role == nets::ParamRole::MuW || p.role == nets::ParamRole::MuB) mu_norm += n;
    if (p.role == nets::ParamRole::SigmaW || p.role == nets::ParamRole::SigmaB) sigma_norm += n;
  }
  CHECK(mu_norm > 0.0);
  CHECK(sigma_norm > 0.0);
}

TEST_CASE("target network sync semantics") {
  Rng rng(31);
  QNetwork src = QNetwork::init(small_arch(Kind::Plain), rng);
  Rng noise(1);
  nets::TargetNetwork target(src, noise);

  std::vector<double> obs(6, 0.25);
  auto qs = src.qvalues_row(obs);
  auto qt = target.net().qvalues_row(obs);
  for (std::size_t i = 0; i < qs.size(); ++i) CHECK(qs[i] == qt[i]);

  // deep copy: mutating the source leaves the target untouched
  (*src.param(0, nets::ParamRole::W))[0] += 10.0;
  auto qt2 = target.net().qvalues_row(obs);
  for (std::size_t i = 0; i < qt.size(); ++i) CHECK(qt[i] == qt2[i]);
  auto qs2 = src.qvalues_row(obs);
  bool changed = false;
  for (std::size_t i = 0; i < qs.size(); ++i) changed |= qs2[i] != qs[i];
  CHECK(changed);

  // architecture mismatch
  Rng rng2(5);
  QNetwork other = QNetwork::init(small_arch(Kind::Plain, 7), rng2);
  CHECK_THROWS_AS(target.sync_from(other, noise), std::invalid_argument);

  // noisy sync copies parameters bit-identically and freezes one new sample
  Rng rng3(6);
  QNetwork noisy_src = QNetwork::init(small_arch(Kind::Noisy), rng3);
  nets::TargetNetwork noisy_target(noisy_src, noise);
  for (std::size_t l = 0; l < noisy_src.layers().size(); ++l) {
    const auto& a = std::get<nets::NoisyLinearLayer>(noisy_src.layers()[l]);
    const auto& b = std::get<nets::NoisyLinearLayer>(noisy_target.net().layers()[l]);
    CHECK(a.mu_W.bit_equal(b.mu_W));
    CHECK(a.sigma_W.bit_equal(b.sigma_W));
    CHECK(a.mu_b.bit_equal(b.mu_b));
    CHECK(a.sigma_b.bit_equal(b.sigma_b));
  }
}

TEST_CASE("greedy argmax breaks ties toward the lowest index") {
  CHECK(nets::argmax_action({0.1, 0.9, 0.9}) == 1);
  CHECK(nets::argmax_action({0.5, 0.5, 0.5}) == 0);
  CHECK(nets::argmax_action({-1.0, -0.5}) == 1);
}

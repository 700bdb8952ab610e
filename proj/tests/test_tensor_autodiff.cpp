#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "noisyq/graph.hpp"
#include "noisyq/rng.hpp"
#include "noisyq/tensor.hpp"

using namespace noisyq;

namespace {

// Independent triple-loop matrix product used as the oracle for matmul.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::zeros({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
  }
  return c;
}

// Direct softmax computation, the oracle for cross_entropy_logits.
double cross_entropy_oracle(const std::vector<double>& logits, int label) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  double p = std::exp(logits[label] - mx) / sum;
  return -std::log(p);
}

}  // namespace

TEST_CASE("matmul matches the triple-loop oracle and frozen examples") {
  Tensor identity = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});

  ad::Graph g;
  auto a = g.leaf(identity);
  auto b = g.leaf(m);
  auto prod = g.matmul(a, b);
  CHECK(g.value(prod).bit_equal(m));

  ad::Graph g2;
  auto z = g2.leaf(Tensor::zeros({2, 2}));
  auto x = g2.leaf(Tensor::matrix(2, 3, {5, 6, 7, 8, 9, 10}));
  CHECK(g2.value(g2.matmul(z, x)).bit_equal(Tensor::zeros({2, 3})));

  // Oracle-derived: [[1,2],[3,4]] * [[5],[6]] = [[17],[39]]
  Tensor rhs = Tensor::matrix(2, 1, {5, 6});
  Tensor expect = matmul_oracle(m, rhs);
  CHECK(expect[0] == 17.0);
  CHECK(expect[1] == 39.0);
  ad::Graph g3;
  auto got = g3.matmul(g3.leaf(m), g3.leaf(rhs));
  CHECK(g3.value(got).bit_equal(expect));

  // Oracle agreement on random shapes.
  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    std::size_t mm = 1 + rng.uniform_int(6), kk = 1 + rng.uniform_int(6), nn = 1 + rng.uniform_int(6);
    Tensor A = Tensor::zeros({mm, kk});
    Tensor B = Tensor::zeros({kk, nn});
    for (std::size_t i = 0; i < A.numel(); ++i) A[i] = rng.uniform(-2, 2);
    for (std::size_t i = 0; i < B.numel(); ++i) B[i] = rng.uniform(-2, 2);
    ad::Graph gg;
    CHECK(gg.value(gg.matmul(gg.leaf(A), gg.leaf(B))).bit_equal(matmul_oracle(A, B)));
  }
}

TEST_CASE("matmul dimension mismatch names both shapes") {
  ad::Graph g;
  auto a = g.leaf(Tensor::zeros({2, 3}));
  auto b = g.leaf(Tensor::zeros({4, 5}));
  try {
    g.matmul(a, b);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x5]") != std::string::npos);
  }
}

TEST_CASE("relu value and gradient") {
  ad::Graph g;
  auto x = g.leaf(Tensor::vector({-1, 0, 2}));
  auto y = g.relu(x);
  CHECK(g.value(y).bit_equal(Tensor::vector({0, 0, 2})));

  ad::Graph g2;
  auto neg = g2.leaf(Tensor::vector({-3, -0.5, -100}));
  CHECK(g2.value(g2.relu(neg)).bit_equal(Tensor::zeros({3})));

  // gradient of sum(relu(x)) is 1 where x > 0, 0 elsewhere
  ad::Graph g3;
  auto x3 = g3.leaf(Tensor::vector({3, -3}));
  auto loss = g3.sum(g3.relu(x3));
  auto grads = g3.backward(loss);
  CHECK(grads[x3][0] == 1.0);
  CHECK(grads[x3][1] == 0.0);
}

TEST_CASE("squared_error values and errors") {
  ad::Graph g;
  auto p = g.leaf(Tensor::vector({1, 2, 3}));
  CHECK(g.value(g.squared_error(p, Tensor::vector({1, 2, 3})))[0] == 0.0);

  ad::Graph g2;
  auto p2 = g2.leaf(Tensor::vector({0}));
  CHECK(g2.value(g2.squared_error(p2, Tensor::vector({2})))[0] == 4.0);

  // hand oracle: ((2-1)^2 + (2-3)^2) / 2 = 1.0
  ad::Graph g3;
  auto p3 = g3.leaf(Tensor::vector({1, 3}));
  CHECK(g3.value(g3.squared_error(p3, Tensor::vector({2, 2})))[0] == 1.0);

  ad::Graph g4;
  auto p4 = g4.leaf(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(g4.squared_error(p4, Tensor::vector({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("cross_entropy_logits values, stability, errors") {
  ad::Graph g;
  auto u = g.leaf(Tensor::vector({0.7, 0.7, 0.7, 0.7}));
  CHECK(g.value(g.cross_entropy_logits(u, 2))[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  ad::Graph g2;
  auto big = g2.leaf(Tensor::vector({1000.0, 0.0}));
  double v = g2.value(g2.cross_entropy_logits(big, 0))[0];
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

  // oracle-derived: -log softmax([1,2,3])[2] = 0.40760596444438064
  double expect = cross_entropy_oracle({1, 2, 3}, 2);
  CHECK(expect == doctest::Approx(0.40760596444438064).epsilon(1e-14));
  ad::Graph g3;
  auto l = g3.leaf(Tensor::vector({1, 2, 3}));
  CHECK(g3.value(g3.cross_entropy_logits(l, 2))[0] == doctest::Approx(expect).epsilon(1e-14));

  ad::Graph g4;
  auto l4 = g4.leaf(Tensor::vector({1, 2, 3}));
  CHECK_THROWS_AS(g4.cross_entropy_logits(l4, 3), std::invalid_argument);
  CHECK_THROWS_AS(g4.cross_entropy_logits(l4, -1), std::invalid_argument);
}

TEST_CASE("backward basics") {
  // loss = sum(x) -> grad = ones
  ad::Graph g;
  auto x = g.leaf(Tensor::vector({4, 5, 6}));
  auto grads = g.backward(g.sum(x));
  CHECK(grads[x].bit_equal(Tensor::vector({1, 1, 1})));

  // hand oracle: d/dw (y - w x)^2 at w=1, x=2, y=0 is -2x(y - wx) = 8
  ad::Graph g2;
  auto w = g2.leaf(Tensor::matrix(1, 1, {1}));
  auto xx = g2.leaf(Tensor::matrix(1, 1, {2}));
  auto pred = g2.matmul(xx, w);
  auto loss = g2.squared_error(g2.select_actions(pred, {0}), Tensor::vector({0}));
  auto grads2 = g2.backward(loss);
  CHECK(grads2[w][0] == doctest::Approx(8.0).epsilon(1e-14));

  // errors: loss not scalar; ref not on record
  ad::Graph g3;
  auto v = g3.leaf(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(g3.backward(v), std::invalid_argument);
  CHECK_THROWS_AS(g3.backward(static_cast<ad::NodeId>(99)), std::invalid_argument);
}

namespace {

// A randomly shaped 1-3 layer ReLU MLP with a squared-error head, expressed
// over an explicit parameter list so finite differences can bump any entry.
struct RandomNet {
  std::vector<std::size_t> widths;
  std::size_t batch = 1;
  std::vector<Tensor> params;  // per layer: W [out x in], b [out]
  Tensor input;                // [batch x input]
  Tensor target;               // [batch]
  std::vector<int> actions;

  static RandomNet make(Rng& rng) {
    RandomNet net;
    int layers = 1 + rng.uniform_int(3);
    net.widths.push_back(2 + rng.uniform_int(8));
    for (int l = 0; l < layers; ++l) net.widths.push_back(2 + rng.uniform_int(12));
    net.batch = 1 + rng.uniform_int(4);
    for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
      Tensor W = Tensor::zeros({net.widths[l + 1], net.widths[l]});
      Tensor b = Tensor::zeros({net.widths[l + 1]});
      for (std::size_t i = 0; i < W.numel(); ++i) W[i] = rng.uniform(-1, 1);
      for (std::size_t i = 0; i < b.numel(); ++i) b[i] = rng.uniform(-1, 1);
      net.params.push_back(std::move(W));
      net.params.push_back(std::move(b));
    }
    net.input = Tensor::zeros({net.batch, net.widths.front()});
    for (std::size_t i = 0; i < net.input.numel(); ++i) net.input[i] = rng.uniform(-1, 1);
    net.target = Tensor::zeros({net.batch});
    for (std::size_t i = 0; i < net.batch; ++i) net.target[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < net.batch; ++i) {
      net.actions.push_back(rng.uniform_int(static_cast<int>(net.widths.back())));
    }
    return net;
  }

  ad::NodeId build(ad::Graph& g, std::vector<ad::NodeId>& param_ids, ad::NodeId& input_id) const {
    input_id = g.leaf(input);
    ad::NodeId h = input_id;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      ad::NodeId W = g.leaf(params[2 * l]);
      ad::NodeId b = g.leaf(params[2 * l + 1]);
      param_ids.push_back(W);
      param_ids.push_back(b);
      h = g.add_bias(g.matmul(h, g.transpose(W)), b);
      if (l + 2 < widths.size()) h = g.relu(h);
    }
    return g.squared_error(g.select_actions(h, actions), target);
  }

  double loss_value() const {
    ad::Graph g;
    std::vector<ad::NodeId> ids;
    ad::NodeId in;
    return g.value(build(g, ids, in))[0];
  }
};

}  // namespace

TEST_CASE("gradients match central finite differences on random nets") {
  Rng rng(2024);
  const double h = 1e-5;
  int checked = 0;
  for (int rep = 0; rep < 25; ++rep) {
    RandomNet net = RandomNet::make(rng);
    ad::Graph g;
    std::vector<ad::NodeId> param_ids;
    ad::NodeId input_id;
    ad::NodeId loss = net.build(g, param_ids, input_id);
    auto grads = g.backward(loss);

    auto check_entry = [&](Tensor& t, const Tensor& analytic, std::size_t i) {
      double keep = t[i];
      t[i] = keep + h;
      double up = net.loss_value();
      t[i] = keep - h;
      double down = net.loss_value();
      t[i] = keep;
      double numeric = (up - down) / (2 * h);
      double denom = std::max({1e-3, std::fabs(numeric), std::fabs(analytic[i])});
      CHECK(std::fabs(analytic[i] - numeric) / denom < 1e-4);
      ++checked;
    };

    for (std::size_t p = 0; p < net.params.size(); ++p) {
      const Tensor& analytic = grads[param_ids[p]];
      for (int probes = 0; probes < 4; ++probes) {
        std::size_t i = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(net.params[p].numel())));
        check_entry(net.params[p], analytic, i);
      }
    }
    const Tensor& input_grad = grads[input_id];
    for (int probes = 0; probes < 6; ++probes) {
      std::size_t i = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(net.input.numel())));
      check_entry(net.input, input_grad, i);
    }
  }
  CHECK(checked > 300);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    ad::Graph g;
    Tensor xv = Tensor::zeros({3, 3});
    for (std::size_t i = 0; i < xv.numel(); ++i) xv[i] = rng.uniform(-1, 1);
    auto x = g.leaf(xv);
    auto f = g.sum(g.relu(x));
    auto gg = g.squared_error(g.select_actions(g.matmul(x, g.transpose(x)), {0, 1, 2}),
                              Tensor::vector({0.5, -0.5, 0.25}));
    double alpha = rng.uniform(-2, 2), beta = rng.uniform(-2, 2);
    auto combined = g.add(g.scale(f, alpha), g.scale(gg, beta));

    auto gf = g.backward(f);
    auto ggrad = g.backward(gg);
    auto gc = g.backward(combined);
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      CHECK(gc[x][i] == doctest::Approx(alpha * gf[x][i] + beta * ggrad[x][i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("records are deterministic and replayable bit-for-bit") {
  Rng rng(11);
  RandomNet net = RandomNet::make(rng);

  auto run_once = [&](std::vector<Tensor>& grads_out) {
    ad::Graph g;
    std::vector<ad::NodeId> ids;
    ad::NodeId in;
    ad::NodeId loss = net.build(g, ids, in);
    grads_out = g.backward(loss);
    return g.value(loss)[0];
  };
  std::vector<Tensor> grads_a, grads_b;
  double la = run_once(grads_a);
  double lb = run_once(grads_b);
  CHECK(la == lb);
  REQUIRE(grads_a.size() == grads_b.size());
  for (std::size_t i = 0; i < grads_a.size(); ++i) CHECK(grads_a[i].bit_equal(grads_b[i]));

  // replay reproduces every recorded value exactly
  ad::Graph g;
  std::vector<ad::NodeId> ids;
  ad::NodeId in;
  net.build(g, ids, in);
  auto replayed = g.replay_forward();
  REQUIRE(replayed.size() == g.size());
  for (std::size_t i = 0; i < replayed.size(); ++i) {
    CHECK(replayed[i].bit_equal(g.value(static_cast<ad::NodeId>(i))));
  }
}

TEST_CASE("finite outputs on finite inputs") {
  Rng rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    RandomNet net = RandomNet::make(rng);
    ad::Graph g;
    std::vector<ad::NodeId> ids;
    ad::NodeId in;
    ad::NodeId loss = net.build(g, ids, in);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(g.value(static_cast<ad::NodeId>(i)).all_finite());
    }
    for (const Tensor& t : g.backward(loss)) CHECK(t.all_finite());
  }
}

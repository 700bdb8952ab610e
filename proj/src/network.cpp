#include "noisyq/network.hpp"

#include <cmath>
#include <stdexcept>

#include "noisyq/audit.hpp"

namespace noisyq::nets {

double noise_factor_transform(double x) {
  double s = (x > 0.0) - (x < 0.0);
  return s * std::sqrt(std::fabs(x));
}

Tensor NoisyLinearLayer::eps_weight() const {
  std::size_t out = eps_out.numel();
  std::size_t in = eps_in.numel();
  Tensor w = Tensor::zeros({out, in});
  for (std::size_t i = 0; i < out; ++i) {
    double fo = transform(eps_out[i]);
    for (std::size_t j = 0; j < in; ++j) {
      w.at(i, j) = fo * transform(eps_in[j]);
    }
  }
  return w;
}

Tensor NoisyLinearLayer::eps_bias() const {
  std::size_t out = eps_out.numel();
  Tensor b = Tensor::zeros({out});
  for (std::size_t i = 0; i < out; ++i) b[i] = transform(eps_out[i]);
  return b;
}

std::vector<std::size_t> Arch::widths() const {
  std::vector<std::size_t> w;
  w.push_back(input);
  for (std::size_t h : hidden) w.push_back(h);
  w.push_back(output);
  return w;
}

void Arch::validate() const {
  for (std::size_t w : widths()) {
    if (w == 0) throw std::invalid_argument("Arch: zero-width layer");
  }
}

std::string kind_name(Kind k) { return k == Kind::Plain ? "plain" : "noisy"; }

Kind kind_from_name(const std::string& name) {
  if (name == "plain") return Kind::Plain;
  if (name == "noisy") return Kind::Noisy;
  throw std::invalid_argument("unknown network kind '" + name + "'");
}

namespace {
constexpr double kSigma0 = 0.5;
}

QNetwork QNetwork::init(const Arch& arch, Rng& rng) {
  arch.validate();
  QNetwork net;
  net.arch_ = arch;
  auto widths = arch.widths();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::size_t in = widths[l];
    std::size_t out = widths[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    if (arch.kind == Kind::Plain) {
      LinearLayer layer;
      layer.W = Tensor::zeros({out, in});
      layer.b = Tensor::zeros({out});
      for (std::size_t i = 0; i < layer.W.numel(); ++i) layer.W[i] = rng.uniform(-bound, bound);
      for (std::size_t i = 0; i < out; ++i) layer.b[i] = rng.uniform(-bound, bound);
      net.layers_.emplace_back(std::move(layer));
    } else {
      NoisyLinearLayer layer;
      layer.mu_W = Tensor::zeros({out, in});
      layer.sigma_W = Tensor::full({out, in}, kSigma0 * bound);
      layer.mu_b = Tensor::zeros({out});
      layer.sigma_b = Tensor::full({out}, kSigma0 * bound);
      layer.eps_in = Tensor::zeros({in});
      layer.eps_out = Tensor::zeros({out});
      for (std::size_t i = 0; i < layer.mu_W.numel(); ++i) layer.mu_W[i] = rng.uniform(-bound, bound);
      for (std::size_t i = 0; i < out; ++i) layer.mu_b[i] = rng.uniform(-bound, bound);
      net.layers_.emplace_back(std::move(layer));
    }
  }
  net.sample_noise(rng);
  return net;
}

ad::NodeId QNetwork::forward(ad::Graph& g, ad::NodeId obs, ForwardRecord* record) const {
  audit::note_network_access(tag_);
  const Tensor& x = g.value(obs);
  if (!x.is_matrix() || x.cols() != arch_.input) {
    throw std::invalid_argument("QNetwork::forward: observation width " + x.shape_str() +
                                " does not match input width " + std::to_string(arch_.input));
  }
  auto note = [&](int layer, ParamRole role, ad::NodeId node) {
    if (record) record->params.push_back({layer, role, node});
  };

  ad::NodeId h = obs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    ad::NodeId weights, bias;
    if (const auto* lin = std::get_if<LinearLayer>(&layers_[l])) {
      weights = g.leaf(lin->W);
      bias = g.leaf(lin->b);
      note(static_cast<int>(l), ParamRole::W, weights);
      note(static_cast<int>(l), ParamRole::B, bias);
    } else {
      const auto& noisy = std::get<NoisyLinearLayer>(layers_[l]);
      ad::NodeId mu_w = g.leaf(noisy.mu_W);
      ad::NodeId sigma_w = g.leaf(noisy.sigma_W);
      ad::NodeId mu_b = g.leaf(noisy.mu_b);
      ad::NodeId sigma_b = g.leaf(noisy.sigma_b);
      ad::NodeId eps_w = g.leaf(noisy.eps_weight());
      ad::NodeId eps_b = g.leaf(noisy.eps_bias());
      weights = g.add(mu_w, g.mul_elem(sigma_w, eps_w));
      bias = g.add(mu_b, g.mul_elem(sigma_b, eps_b));
      note(static_cast<int>(l), ParamRole::MuW, mu_w);
      note(static_cast<int>(l), ParamRole::SigmaW, sigma_w);
      note(static_cast<int>(l), ParamRole::MuB, mu_b);
      note(static_cast<int>(l), ParamRole::SigmaB, sigma_b);
    }
    h = g.add_bias(g.matmul(h, g.transpose(weights)), bias);
    if (l + 1 < layers_.size()) h = g.relu(h);
  }
  return h;
}

Tensor QNetwork::qvalues(const Tensor& obs_batch) const {
  ad::Graph g;
  ad::NodeId obs = g.leaf(obs_batch);
  ad::NodeId q = forward(g, obs);
  return g.value(q);
}

std::vector<double> QNetwork::qvalues_row(const std::vector<double>& obs) const {
  Tensor batch = Tensor::matrix(1, obs.size(), obs);
  Tensor q = qvalues(batch);
  std::vector<double> row(q.numel());
  for (std::size_t i = 0; i < q.numel(); ++i) row[i] = q[i];
  return row;
}

int argmax_action(const std::vector<double>& q) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] > q[best]) best = i;
  }
  return static_cast<int>(best);
}

int QNetwork::greedy_action(const std::vector<double>& obs) const {
  return argmax_action(qvalues_row(obs));
}

bool QNetwork::sample_noise(Rng& rng) {
  if (arch_.kind != Kind::Noisy) return false;
  for (Layer& layer : layers_) {
    auto& noisy = std::get<NoisyLinearLayer>(layer);
    for (std::size_t i = 0; i < noisy.eps_in.numel(); ++i) noisy.eps_in[i] = rng.gaussian();
    for (std::size_t i = 0; i < noisy.eps_out.numel(); ++i) noisy.eps_out[i] = rng.gaussian();
  }
  return true;
}

void QNetwork::zero_noise() {
  if (arch_.kind != Kind::Noisy) return;
  for (Layer& layer : layers_) {
    auto& noisy = std::get<NoisyLinearLayer>(layer);
    noisy.eps_in = Tensor::zeros(noisy.eps_in.shape());
    noisy.eps_out = Tensor::zeros(noisy.eps_out.shape());
  }
}

Tensor* QNetwork::param(int layer, ParamRole role) {
  Layer& l = layers_.at(static_cast<std::size_t>(layer));
  if (auto* lin = std::get_if<LinearLayer>(&l)) {
    switch (role) {
      case ParamRole::W: return &lin->W;
      case ParamRole::B: return &lin->b;
      default: break;
    }
  } else {
    auto& noisy = std::get<NoisyLinearLayer>(l);
    switch (role) {
      case ParamRole::MuW: return &noisy.mu_W;
      case ParamRole::SigmaW: return &noisy.sigma_W;
      case ParamRole::MuB: return &noisy.mu_b;
      case ParamRole::SigmaB: return &noisy.sigma_b;
      default: break;
    }
  }
  throw std::invalid_argument("QNetwork::param: role does not exist on this layer");
}

std::vector<std::pair<std::string, Tensor*>> QNetwork::named_parameters() {
  audit::note_network_access(tag_);
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    std::string prefix = "layer" + std::to_string(l) + ".";
    if (auto* lin = std::get_if<LinearLayer>(&layers_[l])) {
      out.emplace_back(prefix + "W", &lin->W);
      out.emplace_back(prefix + "b", &lin->b);
    } else {
      auto& noisy = std::get<NoisyLinearLayer>(layers_[l]);
      out.emplace_back(prefix + "mu_W", &noisy.mu_W);
      out.emplace_back(prefix + "sigma_W", &noisy.sigma_W);
      out.emplace_back(prefix + "mu_b", &noisy.mu_b);
      out.emplace_back(prefix + "sigma_b", &noisy.sigma_b);
      out.emplace_back(prefix + "eps_in", &noisy.eps_in);
      out.emplace_back(prefix + "eps_out", &noisy.eps_out);
    }
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> QNetwork::named_parameters() const {
  auto mut = const_cast<QNetwork*>(this)->named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

void sgd_update(QNetwork& net, const std::vector<Tensor>& grads,
                const ForwardRecord& record, double lr) {
  for (const RecordedParam& p : record.params) {
    Tensor* theta = net.param(p.layer, p.role);
    const Tensor& g = grads.at(static_cast<std::size_t>(p.node));
    if (!theta->same_shape(g)) {
      throw std::logic_error("sgd_update: gradient shape mismatch");
    }
    for (std::size_t i = 0; i < theta->numel(); ++i) (*theta)[i] -= lr * g[i];
  }
}

TargetNetwork::TargetNetwork(const QNetwork& src, Rng& noise_rng) { sync_from(src, noise_rng); }

void TargetNetwork::sync_from(const QNetwork& src, Rng& noise_rng) {
  if (!net_.layers().empty() && !(net_.arch() == src.arch())) {
    throw std::invalid_argument("TargetNetwork::sync_from: architecture mismatch");
  }
  std::string tag = net_.tag();
  net_ = src;
  net_.set_tag(tag.empty() ? src.tag() : tag);
  net_.sample_noise(noise_rng);
}

void TargetNetwork::resample_noise(Rng& noise_rng) { net_.sample_noise(noise_rng); }

}  // namespace noisyq::nets

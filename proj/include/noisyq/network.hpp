#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "noisyq/graph.hpp"
#include "noisyq/rng.hpp"
#include "noisyq/tensor.hpp"

namespace noisyq::nets {

/// Factor transform for factorized Gaussian weight noise: f(x) = sign(x)*sqrt(|x|),
/// applied to each per-input and per-output factor before the outer product.
/// Swappable; every noisy layer carries a pointer to the transform it uses.
double noise_factor_transform(double x);

struct LinearLayer {
  Tensor W;  // [out x in]
  Tensor b;  // [out]
};

struct NoisyLinearLayer {
  Tensor mu_W;     // [out x in]
  Tensor sigma_W;  // [out x in]
  Tensor mu_b;     // [out]
  Tensor sigma_b;  // [out]
  Tensor eps_in;   // raw Gaussian factor [in]
  Tensor eps_out;  // raw Gaussian factor [out]
  double (*transform)(double) = noise_factor_transform;

  /// Rank-1 weight-noise matrix: eps_W[i,j] = f(eps_out[i]) * f(eps_in[j]).
  Tensor eps_weight() const;
  /// Bias noise: f(eps_out).
  Tensor eps_bias() const;
};

using Layer = std::variant<LinearLayer, NoisyLinearLayer>;

enum class Kind { Plain, Noisy };

struct Arch {
  std::size_t input = 0;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t output = 0;
  Kind kind = Kind::Plain;

  std::vector<std::size_t> widths() const;  // input, hidden..., output
  void validate() const;
  bool operator==(const Arch&) const = default;
};

std::string kind_name(Kind k);
Kind kind_from_name(const std::string& name);

/// How a noisy agent's target network treats its noise between syncs: one
/// frozen sample per sync (the default regression target), or a fresh sample
/// per target evaluation.
enum class TargetNoiseMode { Frozen, Resample };

enum class ParamRole : std::uint8_t { W, B, MuW, SigmaW, MuB, SigmaB };

struct RecordedParam {
  int layer = 0;
  ParamRole role = ParamRole::W;
  ad::NodeId node = -1;
};

/// Leaf node ids of the parameters recorded by one forward pass, for applying
/// gradient updates back to the owning network.
struct ForwardRecord {
  std::vector<RecordedParam> params;
};

/// Fully connected Q-function approximator, plain or noisy. Hidden layers are
/// ReLU, the output layer is linear with one unit per action. Noisy networks
/// parametrize every layer as mu + sigma * eps with factorized Gaussian eps.
class QNetwork {
 public:
  QNetwork() = default;

  /// Random initialization: plain weights and noisy mu uniform in
  /// (-1/sqrt(fan_in), 1/sqrt(fan_in)); noisy sigma constant at
  /// sigma0/sqrt(fan_in) with sigma0 = 0.5; an initial noise sample is drawn.
  static QNetwork init(const Arch& arch, Rng& rng);

  const Arch& arch() const { return arch_; }
  Kind kind() const { return arch_.kind; }
  std::size_t input_width() const { return arch_.input; }
  std::size_t action_count() const { return arch_.output; }

  /// Records Q-value computation for a [batch x input] observation node.
  /// Returns the [batch x actions] output node. When `record` is given, the
  /// parameter leaves are reported for later gradient updates.
  ad::NodeId forward(ad::Graph& g, ad::NodeId obs, ForwardRecord* record = nullptr) const;

  /// Q-values without keeping the record around.
  Tensor qvalues(const Tensor& obs_batch) const;
  std::vector<double> qvalues_row(const std::vector<double>& obs) const;
  /// Greedy action; ties break to the lowest action index.
  int greedy_action(const std::vector<double>& obs) const;

  /// Redraws the factor noise of every noisy layer. Returns false (and leaves
  /// the network untouched) for plain networks.
  bool sample_noise(Rng& rng);
  /// Sets all factor noise to zero, collapsing effective weights to mu.
  void zero_noise();

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Tensor* param(int layer, ParamRole role);
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
  std::vector<std::pair<std::string, Tensor*>> named_parameters();

  /// Audit tag used by the attacker-isolation instrumentation.
  const std::string& tag() const { return tag_; }
  void set_tag(std::string tag) { tag_ = std::move(tag); }

 private:
  Arch arch_;
  std::vector<Layer> layers_;
  std::string tag_;
};

/// Applies one SGD step, theta <- theta - lr * grad, to every parameter the
/// forward pass recorded. Noise tensors are not parameters and never move.
void sgd_update(QNetwork& net, const std::vector<Tensor>& grads,
                const ForwardRecord& record, double lr);

/// Argmax with ties broken to the lowest index.
int argmax_action(const std::vector<double>& q);

/// Frozen copy of a QNetwork used for bootstrap targets. Parameters only
/// change through sync_from; for noisy networks one noise sample is drawn at
/// each sync and then held until the next one.
class TargetNetwork {
 public:
  TargetNetwork() = default;
  TargetNetwork(const QNetwork& src, Rng& noise_rng);

  /// Copies all parameters from `src` (bit-identical) and redraws the frozen
  /// noise once. Throws on architecture mismatch.
  void sync_from(const QNetwork& src, Rng& noise_rng);

  /// Redraws the frozen noise without touching parameters (resample mode).
  void resample_noise(Rng& noise_rng);

  const QNetwork& net() const { return net_; }
  Tensor qvalues(const Tensor& obs_batch) const { return net_.qvalues(obs_batch); }

 private:
  QNetwork net_;
};

}  // namespace noisyq::nets

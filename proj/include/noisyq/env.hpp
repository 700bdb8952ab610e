#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace noisyq::envs {

/// Flattened stack of two grid frames, frame t-1 first, each frame row-major
/// (index = frame*W*H + row*W + col). Clean observations use intensities
/// 0 (empty), 0.5 (prey/object) and 1.0 (agent/paddle); perturbed ones are
/// real-valued in [0,1].
using Observation = std::vector<double>;

struct EnvSpec {
  std::string name = "grid_pursuit";  // grid_pursuit | catcher
  int width = 8;
  int height = 8;
  int episode_cap = 100;
  int patrol_len = 12;  // grid_pursuit prey cycle length
  int frames = 2;

  int action_count() const;
  std::size_t obs_len() const {
    return static_cast<std::size_t>(frames) * width * height;
  }
  void validate() const;

  /// Built-in defaults: grid_pursuit 8x8 cap 100 patrol 12; catcher 8x10 with
  /// a cap of ten drops' worth of fall steps.
  static EnvSpec preset(const std::string& name);
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool terminal = false;
};

struct CompactTransition {
  int next_state = 0;
  double reward = 0.0;
  bool terminal = false;
};

/// Deterministic toy MDP with pixel-like observations. Besides the usual
/// reset/step surface, each env exposes its compact state space so an exact
/// value-iteration oracle and state sampling are possible.
class Env {
 public:
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }
  int actions() const { return spec_.action_count(); }
  bool done() const { return done_; }

  /// Seed-determined initial configuration; both stacked frames equal the
  /// initial frame.
  virtual Observation reset(std::uint64_t episode_seed) = 0;
  virtual StepResult step(int action) = 0;

  virtual int state_count() const = 0;
  virtual int current_state() const = 0;
  virtual bool state_terminal(int state) const = 0;
  /// Pure transition model on compact states; drives the oracle.
  virtual CompactTransition model(int state, int action) const = 0;
  /// Renders a compact state with both frames equal (a standing snapshot).
  virtual Observation render_state(int state) const = 0;
  /// Inverse of the per-frame rendering; input is one frame of W*H entries.
  virtual int decode_frame(const double* frame) const = 0;

 protected:
  explicit Env(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
  void require_live(int action) const;

  EnvSpec spec_;
  bool done_ = true;
  int steps_ = 0;
};

std::unique_ptr<Env> make_env(const EnvSpec& spec);

}  // namespace noisyq::envs

#pragma once

#include "noisyq/env.hpp"

namespace noisyq {

/// Action-selection interface shared by network snapshots and the tabular
/// oracle. begin_step() runs once per environment step before the observation
/// is (possibly) perturbed, so noise-driven policies can fix their sample for
/// the step; act_current() must not advance any random state.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_step() {}
  virtual int act_current(const envs::Observation& obs) = 0;
  int act(const envs::Observation& obs) {
    begin_step();
    return act_current(obs);
  }
};

}  // namespace noisyq

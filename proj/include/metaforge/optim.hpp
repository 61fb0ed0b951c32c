#pragma once

#include <cmath>
#include <vector>

#include "metaforge/tensor.hpp"

namespace metaforge {

/// Adam with bias correction. Moments are lazily shaped on the first step.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 0.001;
  long step_count = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// One update of every parameter in place. params[i] and grads[i] must agree
/// in shape across calls.
void adam_step(AdamState& state, std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads);

struct LrSchedule {
  double initial_rate = 0.001;
  double decay = 0.995;  // per epoch; 1 keeps the rate constant
};

/// initial_rate * decay^epoch.
double decay_rate(const LrSchedule& schedule, int epoch);

}  // namespace metaforge

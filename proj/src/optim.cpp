#include "metaforge/optim.hpp"

namespace metaforge {

void adam_step(AdamState& state, std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size())
    throw ShapeMismatch("adam_step: param/grad count mismatch");
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape);
      state.second_moment.emplace_back(p->shape);
    }
  }
  if (state.first_moment.size() != params.size())
    throw ShapeMismatch("adam_step: state sized for a different parameter set");

  ++state.step_count;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    if (!p.same_shape(g))
      throw ShapeMismatch("adam_step: param " + shape_str(p.shape) + " grad " +
                          shape_str(g.shape));
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m.v[i] = state.beta1 * m.v[i] + (1.0 - state.beta1) * g.v[i];
      v.v[i] = state.beta2 * v.v[i] + (1.0 - state.beta2) * g.v[i] * g.v[i];
      const double mhat = m.v[i] / c1;
      const double vhat = v.v[i] / c2;
      p.v[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

double decay_rate(const LrSchedule& schedule, int epoch) {
  if (epoch < 0) throw InvalidArgument("epoch must be non-negative");
  if (!(schedule.decay > 0.0 && schedule.decay <= 1.0))
    throw InvalidArgument("decay must lie in (0,1]");
  return schedule.initial_rate * std::pow(schedule.decay, static_cast<double>(epoch));
}

}  // namespace metaforge

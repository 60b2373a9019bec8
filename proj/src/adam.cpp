#include "seqtag/adam.hpp"

#include <cmath>

#include "seqtag/error.hpp"

namespace seqtag::nn {

double AdamState::learning_rate() const {
  const double exponent =
      static_cast<double>(examples_seen) / static_cast<double>(decay_every_examples);
  return base_lr * std::pow(decay_factor, exponent);
}

void adam_step(ParamSet& params, const std::map<std::string, Array>& grads, AdamState& state,
               std::uint64_t batch_examples) {
  require(state.base_lr > 0.0, "adam: base learning rate must be positive");
  require(state.decay_factor > 0.0 && state.decay_factor <= 1.0,
          "adam: decay factor must be in (0, 1]");
  require(state.decay_every_examples > 0, "adam: decay interval must be positive");
  for (const auto& [name, p] : params) {
    if (!p.trainable) continue;
    auto it = grads.find(name);
    require(it != grads.end(), "adam: missing gradient for '" + name + "'");
    require(it->second.size() == p.value.size(), "adam: gradient shape mismatch for '" + name + "'");
    if (!it->second.all_finite()) throw NumericError("adam: non-finite gradient for '" + name + "'");
  }

  const double lr = state.learning_rate();
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    const Array& g = grads.at(name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, p.value.shape(), 0.0);
    auto [v_it, v_new] = state.second_moment.try_emplace(name, p.value.shape(), 0.0);
    Array& m = m_it->second;
    Array& v = v_it->second;
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
  state.examples_seen += batch_examples;
}

}  // namespace seqtag::nn

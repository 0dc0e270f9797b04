#include "fedgat/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace fedgat {

AdamState::AdamState(const ParamStore& params, AdamConfig config)
    : config_(config) {
  for (const auto& [name, t] : params.items()) {
    m_.add(name, Tensor::zeros(t.shape()));
    v_.add(name, Tensor::zeros(t.shape()));
  }
}

ParamStore adam_step(const ParamStore& params, const ParamStore& grads,
                     AdamState& state) {
  if (!ParamStore::same_schema(params, grads) ||
      !ParamStore::same_schema(params, state.m_)) {
    throw std::invalid_argument(
        "adam_step: parameter, gradient, and state schemas disagree");
  }
  const AdamConfig& cfg = state.config_;
  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double m_corr = 1.0 - std::pow(cfg.beta1, t);
  const double v_corr = 1.0 - std::pow(cfg.beta2, t);

  ParamStore updated;
  for (const auto& [name, p] : params.items()) {
    const auto& g = grads.at(name).values();
    const auto& pv = p.values();
    std::vector<double> m = state.m_.at(name).values();
    std::vector<double> v = state.v_.at(name).values();
    std::vector<double> out(pv.size());
    for (std::size_t i = 0; i < pv.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / m_corr;
      const double v_hat = v[i] / v_corr;
      out[i] = pv[i] - cfg.learning_rate * m_hat /
                           (std::sqrt(v_hat) + cfg.epsilon);
    }
    state.m_.replace(name, Tensor(p.shape(), std::move(m)));
    state.v_.replace(name, Tensor(p.shape(), std::move(v)));
    updated.add(name, Tensor(p.shape(), std::move(out)));
  }
  return updated;
}

}  // namespace fedgat

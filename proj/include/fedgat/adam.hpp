#pragma once

#include <cstdint>

#include "fedgat/param_store.hpp"

namespace fedgat {

struct AdamConfig {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moment accumulators plus the step counter for one
// parameter set.
class AdamState {
 public:
  AdamState(const ParamStore& params, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }
  const ParamStore& first_moment() const { return m_; }
  const ParamStore& second_moment() const { return v_; }

 private:
  friend ParamStore adam_step(const ParamStore&, const ParamStore&,
                              AdamState&);
  AdamConfig config_;
  ParamStore m_;
  ParamStore v_;
  std::int64_t step_ = 0;
};

// One bias-corrected Adam update. Returns the updated parameters and
// advances the optimizer state. Throws if the three schemas disagree.
ParamStore adam_step(const ParamStore& params, const ParamStore& grads,
                     AdamState& state);

}  // namespace fedgat

#include "zeroforge/optimizer.h"

#include <cmath>

#include "zeroforge/errors.h"

namespace zeroforge {

Adam::Adam(ParameterList params, AdamOptions options) : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0.0)) throw ParameterError("learning rate must be positive");
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i]->value.size(), 0.0);
    v_[i].assign(params_[i]->value.size(), 0.0);
  }
}

void Adam::Step() {
  ++t_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.trainable) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * g;
      v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * g * g;
      p.value[k] -= options_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + options_.eps);
    }
  }
}

}  // namespace zeroforge

#include "mtlmol/adam.hpp"

#include <cmath>

namespace mtlmol {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config) {
  if (params.size() != grads.size()) {
    throw NumericError("ShapeMismatch", "adam_step: " + std::to_string(params.size()) +
                                            " params vs " + std::to_string(grads.size()) + " grads");
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.m.size() != params.size()) {
    throw NumericError("ShapeMismatch", "adam_step: optimizer state built for a different parameter set");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    if (!p.same_shape(g) || !p.same_shape(state.m[k])) {
      throw NumericError("ShapeMismatch", "adam_step: parameter " + std::to_string(k) + " " +
                                              p.shape_string() + " vs grad " + g.shape_string());
    }
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace mtlmol

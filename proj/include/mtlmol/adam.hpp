#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mtlmol/tensor.hpp"

namespace mtlmol {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update of every tensor in `params`. State buffers
// are created on first use.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config);

}  // namespace mtlmol

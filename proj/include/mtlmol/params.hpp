#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mtlmol/tensor.hpp"

namespace mtlmol {

// Named parameter tensors in a fixed order. The order is the checkpoint
// order and the optimizer order.
class ParamStore {
 public:
  Tensor& add(std::string name, Tensor value);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& at(std::size_t i) { return tensors_[i]; }
  const Tensor& at(std::size_t i) const { return tensors_[i]; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<Tensor*> pointers();

  // Total number of scalars.
  std::size_t scalar_count() const;

  bool operator==(const ParamStore& o) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

// Portable uniform double in [0,1) from the top 53 bits of a 64-bit draw.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Glorot-uniform initialisation for a [fan_in x fan_out] weight.
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace mtlmol

#include "mtlmol/params.hpp"

#include <algorithm>
#include <cmath>

namespace mtlmol {

Tensor& ParamStore::add(std::string name, Tensor value) {
  if (contains(name)) throw ConfigError("DuplicateParameter", name);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
  return tensors_.back();
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ConfigError("UnknownParameter", name);
  return tensors_[static_cast<std::size_t>(it - names_.begin())];
}

const Tensor& ParamStore::get(const std::string& name) const {
  return const_cast<ParamStore*>(this)->get(name);
}

bool ParamStore::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::vector<Tensor*> ParamStore::pointers() {
  std::vector<Tensor*> out;
  out.reserve(tensors_.size());
  for (auto& t : tensors_) out.push_back(&t);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w(fan_in, fan_out);
  for (double& v : w.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  return w;
}

}  // namespace mtlmol

#include "mtlmol/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace mtlmol {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw NumericError("ShapeMismatch", "tensor of shape [" + std::to_string(rows) + "x" +
                                            std::to_string(cols) + "] given " +
                                            std::to_string(values_.size()) + " values");
  }
}

double Tensor::item() const {
  if (size() != 1) throw NumericError("NotScalar", "item() on " + shape_string());
  return values_[0];
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

Tensor transpose(const Tensor& t) {
  Tensor out(t.cols(), t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) out(c, r) = t(r, c);
  }
  return out;
}

}  // namespace mtlmol

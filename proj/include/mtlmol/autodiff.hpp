#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mtlmol/tensor.hpp"

// Reverse-mode automatic differentiation over Tensor.
//
// A Var is a handle to a node holding a forward value. Nodes that need a
// gradient (leaves created with requires_grad, and any op result with such
// an input) are recorded on their Tape in creation order; ops whose inputs
// are all constants compute a value and record nothing. Tape::backward walks
// the record in reverse, visiting each node exactly once.

namespace mtlmol::ad {

class Tape;

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  Tape* tape = nullptr;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  // Zero tensor of the value's shape when no gradient reached this node.
  Tensor grad() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable leaf owned by this tape.
  Var leaf(Tensor value);

  // Number of recorded nodes (leaves included).
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Throws NumericError("NotScalar") / ("TapeConsumed").
  void backward(const Var& loss);

  Var record(Tensor value, std::vector<std::shared_ptr<Node>> inputs, const char* op,
             std::function<void(Node&)> backward);

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
  bool consumed_ = false;
};

// Non-differentiable value; never recorded.
Var constant(Tensor value);

// --- linear algebra / structure -------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// a[m x n] + bias[1 x n] broadcast over rows
Var add_row(const Var& a, const Var& bias);
Var scale(const Var& a, double factor);
// Row i multiplied by factors[i] (constant).
Var scale_rows(const Var& a, std::span<const double> factors);
// a / s with s a 1x1 Var
Var div_scalar(const Var& a, const Var& s);
Var sum(const Var& a);       // 1x1
Var mean(const Var& a);      // 1x1
Var sum_rows(const Var& a);  // [1 x cols], column sums
Var concat_cols(std::span<const Var> parts);
Var concat_cols(const Var& a, const Var& b);
Var index_select(const Var& a, std::span<const int> rows);
// out[index[i]] += a[i]; out has `out_rows` rows (zero rows when unindexed).
Var scatter_add(const Var& a, std::span<const int> index, std::size_t out_rows);

// --- elementwise nonlinearities -------------------------------------------

Var relu(const Var& a);
Var sigmoid(const Var& a);
// max(x,0) + log1p(exp(-|x|))
Var softplus(const Var& a);
Var log(const Var& a);  // DomainError for x <= 0
Var exp(const Var& a);
// base^exponent elementwise; DomainError unless base > 0.
Var pow_elem(const Var& base, const Var& exponent);
// Gradient passes where lo <= x <= hi and is 0 where x was clipped.
Var clamp(const Var& a, double lo, double hi);

// Scalar helpers shared with non-taped code.
double softplus_value(double x);
double sigmoid_value(double x);

}  // namespace mtlmol::ad

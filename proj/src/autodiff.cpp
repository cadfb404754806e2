#include "mtlmol/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>

#include "mtlmol/simd/kernels.hpp"

namespace mtlmol::ad {
namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw NumericError("ShapeMismatch",
                     std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
}

void require_finite(const char* op, const Tensor& t) {
  if (!t.all_finite()) {
    throw NumericError("NonFinite", std::string(op) + " produced a non-finite value in " +
                                        t.shape_string() + " output");
  }
}

// Records `value` when any input needs a gradient; otherwise returns a
// constant and drops `backward`.
Var make(Tensor value, const char* op, std::initializer_list<const Var*> ins,
         std::function<void(Node&)> backward) {
  require_finite(op, value);
  Tape* tape = nullptr;
  for (const Var* v : ins) {
    if (!v->requires_grad()) continue;
    if (tape && v->node().tape != tape) {
      throw NumericError("TapeMismatch", std::string(op) + " mixes values from two tapes");
    }
    tape = v->node().tape;
  }
  if (!tape) return constant(std::move(value));
  std::vector<std::shared_ptr<Node>> inputs;
  inputs.reserve(ins.size());
  for (const Var* v : ins) inputs.push_back(v->ptr());
  return tape->record(std::move(value), std::move(inputs), op, std::move(backward));
}

Node& in(Node& n, std::size_t i) { return *n.inputs[i]; }

template <class F>
Var unary(const Var& a, const char* op, F&& f, std::function<void(Node&)> backward) {
  Tensor out(a.rows(), a.cols());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return make(std::move(out), op, {&a}, std::move(backward));
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (!grad.same_shape(value)) grad = Tensor(value.rows(), value.cols());
  return grad;
}

Tensor Var::grad() const {
  if (node_->grad.same_shape(node_->value)) return node_->grad;
  return Tensor(node_->value.rows(), node_->value.cols());
}

Var Tape::leaf(Tensor value) {
  require_finite("leaf", value);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->tape = this;
  nodes_.push_back(node);
  return Var(std::move(node));
}

Var Tape::record(Tensor value, std::vector<std::shared_ptr<Node>> inputs, const char* op,
                 std::function<void(Node&)> backward) {
  if (consumed_) throw NumericError("TapeConsumed", "recording onto a tape after backward()");
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->tape = this;
  node->op = op;
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  nodes_.push_back(node);
  return Var(std::move(node));
}

void Tape::backward(const Var& loss) {
  if (consumed_) throw NumericError("TapeConsumed", "backward() already ran on this tape");
  if (!loss || loss.value().size() != 1 || loss.rows() != 1) {
    throw NumericError("NotScalar", "backward() needs a 1x1 loss");
  }
  if (loss.node().tape != this) {
    throw NumericError("TapeMismatch", "loss was not recorded on this tape");
  }
  consumed_ = true;
  loss.node().grad_buffer()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(n);
  }
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) shape_error("matmul", x, y);
  const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
  Tensor out(m, n);
  simd::active().gemm_nn(m, k, n, x.data(), y.data(), out.data());
  return make(std::move(out), "matmul", {&a, &b}, [m, k, n](Node& self) {
    Node& na = in(self, 0);
    Node& nb = in(self, 1);
    const auto& kt = simd::active();
    if (na.requires_grad) {
      const Tensor bt = transpose(nb.value);
      kt.gemm_nn(m, n, k, self.grad.data(), bt.data(), na.grad_buffer().data());
    }
    if (nb.requires_grad) {
      kt.gemm_tn(m, k, n, na.value.data(), self.grad.data(), nb.grad_buffer().data());
    }
  });
}

Var add(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) shape_error("add", a.value(), b.value());
  Tensor out(a.rows(), a.cols());
  simd::active().add(out.size(), a.value().data(), b.value().data(), out.data());
  return make(std::move(out), "add", {&a, &b}, [](Node& self) {
    const auto& kt = simd::active();
    for (std::size_t i = 0; i < 2; ++i) {
      Node& ni = in(self, i);
      if (!ni.requires_grad) continue;
      Tensor& g = ni.grad_buffer();
      kt.add(g.size(), g.data(), self.grad.data(), g.data());
    }
  });
}

Var sub(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) shape_error("sub", a.value(), b.value());
  Tensor out(a.rows(), a.cols());
  simd::active().sub(out.size(), a.value().data(), b.value().data(), out.data());
  return make(std::move(out), "sub", {&a, &b}, [](Node& self) {
    const auto& kt = simd::active();
    if (Node& na = in(self, 0); na.requires_grad) {
      Tensor& g = na.grad_buffer();
      kt.add(g.size(), g.data(), self.grad.data(), g.data());
    }
    if (Node& nb = in(self, 1); nb.requires_grad) {
      Tensor& g = nb.grad_buffer();
      kt.sub(g.size(), g.data(), self.grad.data(), g.data());
    }
  });
}

Var mul(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) shape_error("mul", a.value(), b.value());
  Tensor out(a.rows(), a.cols());
  simd::active().mul(out.size(), a.value().data(), b.value().data(), out.data());
  return make(std::move(out), "mul", {&a, &b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      Node& ni = in(self, i);
      if (!ni.requires_grad) continue;
      const Tensor& other = in(self, 1 - i).value;
      Tensor& g = ni.grad_buffer();
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += self.grad[j] * other[j];
    }
  });
}

Var add_row(const Var& a, const Var& bias) {
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  if (b.rows() != 1 || b.cols() != x.cols()) shape_error("add_row", x, b);
  Tensor out(x.rows(), x.cols());
  const auto& kt = simd::active();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    kt.add(x.cols(), x.data() + r * x.cols(), b.data(), out.data() + r * x.cols());
  }
  return make(std::move(out), "add_row", {&a, &bias}, [](Node& self) {
    const auto& kt = simd::active();
    const std::size_t rows = self.value.rows(), cols = self.value.cols();
    if (Node& na = in(self, 0); na.requires_grad) {
      Tensor& g = na.grad_buffer();
      kt.add(g.size(), g.data(), self.grad.data(), g.data());
    }
    if (Node& nb = in(self, 1); nb.requires_grad) {
      Tensor& g = nb.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) kt.add(cols, g.data(), self.grad.data() + r * cols, g.data());
    }
  });
}

Var scale(const Var& a, double factor) {
  return unary(a, "scale", [factor](double x) { return x * factor; }, [factor](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    simd::active().axpy(g.size(), factor, self.grad.data(), g.data());
  });
}

Var scale_rows(const Var& a, std::span<const double> factors) {
  const Tensor& x = a.value();
  if (factors.size() != x.rows()) {
    throw NumericError("ShapeMismatch", "scale_rows: " + std::to_string(factors.size()) +
                                            " factors for " + x.shape_string());
  }
  std::vector<double> f(factors.begin(), factors.end());
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) * f[r];
  }
  return make(std::move(out), "scale_rows", {&a}, [f = std::move(f)](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    const std::size_t cols = g.cols();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      simd::active().axpy(cols, f[r], self.grad.data() + r * cols, g.data() + r * cols);
    }
  });
}

Var div_scalar(const Var& a, const Var& s) {
  if (s.value().size() != 1) shape_error("div_scalar", a.value(), s.value());
  const double d = s.value()[0];
  if (d == 0.0) throw NumericError("DomainError", "div_scalar by zero");
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / d;
  return make(std::move(out), "div_scalar", {&a, &s}, [d](Node& self) {
    if (Node& na = in(self, 0); na.requires_grad) {
      Tensor& g = na.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / d;
    }
    if (Node& ns = in(self, 1); ns.requires_grad) {
      const Tensor& x = in(self, 0).value;
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) acc += self.grad[i] * x[i];
      ns.grad_buffer()[0] += -acc / (d * d);
    }
  });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  return make(Tensor::scalar(acc), "sum", {&a}, [](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    const double s = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s;
  });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw NumericError("ShapeMismatch", "mean of an empty tensor");
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  return make(Tensor::scalar(acc / static_cast<double>(n)), "mean", {&a}, [n](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    const double s = self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s;
  });
}

Var sum_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(1, x.cols());
  const auto& kt = simd::active();
  for (std::size_t r = 0; r < x.rows(); ++r) kt.add(x.cols(), out.data(), x.data() + r * x.cols(), out.data());
  return make(std::move(out), "sum_rows", {&a}, [](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    const std::size_t cols = g.cols();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      simd::active().add(cols, g.data() + r * cols, self.grad.data(), g.data() + r * cols);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("ShapeMismatch", "concat_cols of nothing");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p.value().data() + r * p.cols(), p.cols(), out.data() + r * cols + off);
    }
    off += p.cols();
  }

  // make() takes an initializer_list, so gather requires-grad state here.
  require_finite("concat_cols", out);
  Tape* tape = nullptr;
  for (const Var& p : parts) {
    if (!p.requires_grad()) continue;
    if (tape && p.node().tape != tape) throw NumericError("TapeMismatch", "concat_cols mixes tapes");
    tape = p.node().tape;
  }
  if (!tape) return constant(std::move(out));
  std::vector<std::shared_ptr<Node>> inputs;
  for (const Var& p : parts) inputs.push_back(p.ptr());
  return tape->record(std::move(out), std::move(inputs), "concat_cols",
                      [offsets = std::move(offsets), cols](Node& self) {
                        const auto& kt = simd::active();
                        for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                          Node& ni = *self.inputs[i];
                          if (!ni.requires_grad) continue;
                          Tensor& g = ni.grad_buffer();
                          const std::size_t w = g.cols();
                          for (std::size_t r = 0; r < g.rows(); ++r) {
                            kt.add(w, g.data() + r * w, self.grad.data() + r * cols + offsets[i],
                                   g.data() + r * w);
                          }
                        }
                      });
}

Var concat_cols(const Var& a, const Var& b) {
  const Var parts[] = {a, b};
  return concat_cols(std::span<const Var>(parts));
}

Var index_select(const Var& a, std::span<const int> rows) {
  const Tensor& x = a.value();
  const std::size_t cols = x.cols();
  Tensor out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= x.rows()) {
      throw NumericError("ShapeMismatch", "index_select: row " + std::to_string(rows[i]) +
                                              " out of range for " + x.shape_string());
    }
    std::copy_n(x.data() + rows[i] * cols, cols, out.data() + i * cols);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return make(std::move(out), "index_select", {&a}, [idx = std::move(idx)](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    const std::size_t cols = g.cols();
    const auto& kt = simd::active();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = g.data() + static_cast<std::size_t>(idx[i]) * cols;
      kt.add(cols, dst, self.grad.data() + i * cols, dst);
    }
  });
}

Var scatter_add(const Var& a, std::span<const int> index, std::size_t out_rows) {
  const Tensor& x = a.value();
  if (index.size() != x.rows()) {
    throw NumericError("ShapeMismatch", "scatter_add: " + std::to_string(index.size()) +
                                            " indices for " + x.shape_string());
  }
  const std::size_t cols = x.cols();
  Tensor out(out_rows, cols);
  const auto& kt = simd::active();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= out_rows) {
      throw NumericError("ShapeMismatch", "scatter_add: target row " + std::to_string(index[i]) +
                                              " out of range " + std::to_string(out_rows));
    }
    double* dst = out.data() + static_cast<std::size_t>(index[i]) * cols;
    kt.add(cols, dst, x.data() + i * cols, dst);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make(std::move(out), "scatter_add", {&a}, [idx = std::move(idx)](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    const std::size_t cols = g.cols();
    const auto& kt = simd::active();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = g.data() + i * cols;
      kt.add(cols, dst, self.grad.data() + static_cast<std::size_t>(idx[i]) * cols, dst);
    }
  });
}

Var relu(const Var& a) {
  Tensor out(a.rows(), a.cols());
  simd::active().relu(out.size(), a.value().data(), out.data());
  return make(std::move(out), "relu", {&a}, [](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    simd::active().relu_backward(g.size(), self.value.data(), self.grad.data(), g.data());
  });
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Var sigmoid(const Var& a) {
  return unary(a, "sigmoid", sigmoid_value, [](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = self.value[i];
      g[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Var softplus(const Var& a) {
  return unary(a, "softplus", softplus_value, [](Node& self) {
    const Tensor& x = in(self, 0).value;
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * sigmoid_value(x[i]);
  });
}

Var log(const Var& a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw NumericError("DomainError", "log of non-positive value " + std::to_string(v));
  }
  return unary(a, "log", [](double x) { return std::log(x); }, [](Node& self) {
    const Tensor& x = in(self, 0).value;
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / x[i];
  });
}

Var exp(const Var& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](Node& self) {
    Tensor& g = in(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
  });
}

Var pow_elem(const Var& base, const Var& exponent) {
  const Tensor& b = base.value();
  const Tensor& e = exponent.value();
  if (!b.same_shape(e)) shape_error("pow_elem", b, e);
  Tensor out(b.rows(), b.cols());
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!(b[i] > 0.0)) {
      throw NumericError("DomainError", "pow_elem base must be > 0, got " + std::to_string(b[i]));
    }
    out[i] = std::exp(e[i] * std::log(b[i]));
  }
  return make(std::move(out), "pow_elem", {&base, &exponent}, [](Node& self) {
    Node& nb = in(self, 0);
    Node& ne = in(self, 1);
    if (nb.requires_grad) {
      Tensor& g = nb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * ne.value[i] * std::pow(nb.value[i], ne.value[i] - 1.0);
      }
    }
    if (ne.requires_grad) {
      Tensor& g = ne.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * self.value[i] * std::log(nb.value[i]);
      }
    }
  });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](Node& self) {
                 const Tensor& x = in(self, 0).value;
                 Tensor& g = in(self, 0).grad_buffer();
                 for (std::size_t i = 0; i < g.size(); ++i) {
                   if (x[i] >= lo && x[i] <= hi) g[i] += self.grad[i];
                 }
               });
}

}  // namespace mtlmol::ad

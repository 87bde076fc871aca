#pragma once

// Reverse-mode automatic differentiation over a closed set of matrix
// primitives. A Tape records nodes in creation order, so reverse creation
// order is a valid topological order for the backward sweep.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgs/error.hpp"
#include "dgs/matrix.hpp"

namespace dgs {

// A trainable matrix. `grad` accumulates across backward calls until reset.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() {
    if (!grad.same_shape(value)) grad = Matrix(value.rows(), value.cols());
    grad.fill(0.0);
  }
};

using ParameterList = std::vector<Parameter*>;

inline void zero_grad(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Propagates the node's upstream gradient to its parents.
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), false, nullptr, nullptr); }

  Var param(Parameter& p) {
    if (!p.grad.same_shape(p.value)) p.zero_grad();
    return push(p.value, true, nullptr, &p);
  }

  // Records an op result. `back` is dropped when no input requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn back) {
    bool needs = false;
    for (const Var& v : inputs) {
      check_owner(v);
      needs = needs || nodes_[v.id_].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(back) : BackwardFn{}, nullptr);
  }

  Var record(Matrix value, std::span<const Var> inputs, BackwardFn back) {
    bool needs = false;
    for (const Var& v : inputs) {
      check_owner(v);
      needs = needs || nodes_[v.id_].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(back) : BackwardFn{}, nullptr);
  }

  const Matrix& value(const Var& v) const { return nodes_[v.id_].value; }

  // Gradient of the last backward() loss with respect to `v`; zeros if unreached.
  Matrix grad(const Var& v) const {
    const Node& n = nodes_[v.id_];
    return n.grad.empty() && !n.value.empty() ? Matrix(n.value.rows(), n.value.cols()) : n.grad;
  }

  bool requires_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }

  // Adds `g` into the gradient slot of `v`.
  void accumulate(const Var& v, const Matrix& g) {
    Node& n = nodes_[v.id_];
    if (!n.requires_grad) return;
    if (n.grad.empty()) {
      require_same_shape(n.value, g, "gradient");
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Reverse sweep from a scalar loss. Parameter leaves add their gradient
  // into Parameter::grad; callers reset those between independent passes.
  void backward(const Var& loss) {
    check_owner(loss);
    const Matrix& lv = nodes_[loss.id_].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward: loss must be 1x1, got " + lv.shape());
    }
    for (Node& n : nodes_) n.grad = Matrix();
    if (!nodes_[loss.id_].requires_grad) return;
    nodes_[loss.id_].grad = Matrix(1, 1, 1.0);
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.param != nullptr) {
        n.param->grad += n.grad;
      } else if (n.back) {
        const Matrix upstream = n.grad;
        n.back(*this, upstream);
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn back;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Matrix value, bool requires_grad, BackwardFn back, Parameter* p) {
    if (!value.all_finite()) {
      throw NumericError("non-finite value produced on tape (node " +
                         std::to_string(nodes_.size()) + ", shape " + value.shape() + ")");
    }
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(back), p, requires_grad});
    return Var(this, nodes_.size() - 1);
  }

  void check_owner(const Var& v) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) {
      throw ContractError("variable does not belong to this tape");
    }
  }

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

namespace ad {

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  return t.record(dgs::matmul(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, matmul_nt(g, b.value()));
    if (tp.requires_grad(b)) tp.accumulate(b, matmul_tn(a.value(), g));
  });
}

inline Var add(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -1.0 * g);
  });
}

inline Var hadamard(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  return t.record(dgs::hadamard(a.value(), b.value()), {a, b},
                  [a, b](Tape& tp, const Matrix& g) {
                    if (tp.requires_grad(a)) tp.accumulate(a, dgs::hadamard(g, b.value()));
                    if (tp.requires_grad(b)) tp.accumulate(b, dgs::hadamard(g, a.value()));
                  });
}

inline Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  return t.record(s * a.value(), {a}, [a, s](Tape& tp, const Matrix& g) { tp.accumulate(a, s * g); });
}

inline Var add_scalar(const Var& a, double s) {
  Tape& t = *a.tape();
  return t.record(map(a.value(), [s](double x) { return x + s; }), {a},
                  [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g); });
}

inline Var transpose(const Var& a) {
  Tape& t = *a.tape();
  return t.record(dgs::transpose(a.value()), {a},
                  [a](Tape& tp, const Matrix& g) { tp.accumulate(a, dgs::transpose(g)); });
}

inline Var relu(const Var& a) {
  Tape& t = *a.tape();
  return t.record(map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a},
                  [a](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, zip(g, a.value(), "relu", [](double gi, double x) {
                                    return x > 0.0 ? gi : 0.0;
                                  }));
                  });
}

inline Var leaky_relu(const Var& a, double slope) {
  Tape& t = *a.tape();
  return t.record(map(a.value(), [slope](double x) { return x > 0.0 ? x : slope * x; }), {a},
                  [a, slope](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, zip(g, a.value(), "leaky_relu", [slope](double gi, double x) {
                                    return x > 0.0 ? gi : slope * gi;
                                  }));
                  });
}

inline Var sigmoid(const Var& a) {
  Tape& t = *a.tape();
  Matrix out = map(a.value(), logistic);
  return t.record(out, {a}, [a, out](Tape& tp, const Matrix& g) {
    tp.accumulate(a, zip(g, out, "sigmoid", [](double gi, double s) { return gi * s * (1.0 - s); }));
  });
}

inline Var exp(const Var& a) {
  Tape& t = *a.tape();
  Matrix out = map(a.value(), [](double x) { return std::exp(x); });
  return t.record(out, {a}, [a, out](Tape& tp, const Matrix& g) {
    tp.accumulate(a, dgs::hadamard(g, out));
  });
}

inline Var softmax_rows(const Var& a) {
  Tape& t = *a.tape();
  Matrix out = dgs::softmax_rows(a.value());
  return t.record(out, {a}, [a, out](Tape& tp, const Matrix& g) {
    Matrix ga(out.rows(), out.cols());
    for (std::size_t i = 0; i < out.rows(); ++i) {
      const auto y = out.row(i);
      const auto gi = g.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) dot += gi[j] * y[j];
      auto r = ga.row(i);
      for (std::size_t j = 0; j < y.size(); ++j) r[j] = y[j] * (gi[j] - dot);
    }
    tp.accumulate(a, ga);
  });
}

// Mean over rows: (r x c) -> (1 x c).
inline Var row_mean(const Var& a) {
  Tape& t = *a.tape();
  return t.record(column_mean(a.value()), {a}, [a](Tape& tp, const Matrix& g) {
    const std::size_t r = a.rows();
    Matrix ga(r, a.cols());
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) = g(0, j) / static_cast<double>(r);
    tp.accumulate(a, ga);
  });
}

inline Var sum(const Var& a) {
  Tape& t = *a.tape();
  return t.record(Matrix(1, 1, dgs::sum(a.value())), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, Matrix(a.rows(), a.cols(), g[0]));
  });
}

inline Var squared_frobenius(const Var& a) {
  Tape& t = *a.tape();
  return t.record(Matrix(1, 1, squared_norm(a.value())), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, (2.0 * g[0]) * a.value());
  });
}

inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + parts.front().value().shape() + " vs " +
                           p.value().shape());
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, offset + j) = p.value()(i, j);
    offset += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [inputs](Tape& tp, const Matrix& g) {
    std::size_t off = 0;
    for (const Var& p : inputs) {
      if (tp.requires_grad(p)) {
        Matrix gp(p.rows(), p.cols());
        for (std::size_t i = 0; i < gp.rows(); ++i)
          for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) = g(i, off + j);
        tp.accumulate(p, gp);
      }
      off += p.cols();
    }
  });
}

// Columns [begin, end).
inline Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") outside " + a.value().shape());
  }
  Tape& t = *a.tape();
  Matrix out(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = a.value()(i, j);
  return t.record(std::move(out), {a}, [a, begin](Tape& tp, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) = g(i, j);
    tp.accumulate(a, ga);
  });
}

// Elementwise clamp; gradient passes only where the input is strictly inside.
inline Var clamp(const Var& a, double lo, double hi) {
  Tape& t = *a.tape();
  return t.record(map(a.value(), [lo, hi](double x) { return std::clamp(x, lo, hi); }), {a},
                  [a, lo, hi](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, zip(g, a.value(), "clamp", [lo, hi](double gi, double x) {
                                    return (x > lo && x < hi) ? gi : 0.0;
                                  }));
                  });
}

inline Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  Tape& t = *a.tape();
  return t.record(dgs::reshape(a.value(), rows, cols), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, dgs::reshape(g, a.rows(), a.cols()));
  });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

}  // namespace ad
}  // namespace dgs

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dgs/autodiff.hpp"
#include "dgs/error.hpp"

namespace dgs {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled decay coefficient; applied as w -= lr * decay * w.
  double weight_decay = 0.0;
};

// Adaptive-moment optimizer with bias correction and decoupled weight decay.
class Adam {
 public:
  Adam(ParameterList params, AdamOptions options) : params_(std::move(params)), options_(options) {
    if (!(options_.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (options_.weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
    first_.reserve(params_.size());
    second_.reserve(params_.size());
    for (const Parameter* p : params_) {
      first_.emplace_back(p->value.rows(), p->value.cols());
      second_.emplace_back(p->value.rows(), p->value.cols());
    }
  }

  // One update from the gradients currently stored in each Parameter,
  // multiplied by `grad_scale` (e.g. 1/batch for averaged losses).
  void step(double grad_scale = 1.0) {
    ++steps_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double lr = options_.learning_rate;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Parameter& p = *params_[k];
      require_same_shape(p.value, p.grad, "optimizer step");
      Matrix& m = first_[k];
      Matrix& v = second_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = grad_scale * p.grad[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        p.value[i] -= lr * (m_hat / (std::sqrt(v_hat) + options_.epsilon));
        if (options_.weight_decay > 0.0) p.value[i] -= lr * options_.weight_decay * p.value[i];
      }
      require_finite(p.value, "optimizer update");
    }
  }

  std::size_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  const Matrix& first_moment(std::size_t k) const { return first_[k]; }
  const Matrix& second_moment(std::size_t k) const { return second_[k]; }

 private:
  ParameterList params_;
  AdamOptions options_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::size_t steps_ = 0;
};

}  // namespace dgs

#pragma once

// Deep one-class (hypersphere) detector over flattened spatiotemporal
// embeddings. The network is bias-free and the center is fixed after
// initialization, which rules out the trivial constant-map solution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dgs/autodiff.hpp"
#include "dgs/error.hpp"
#include "dgs/optimizer.hpp"
#include "dgs/random.hpp"
#include "dgs/temporal.hpp"

namespace dgs {

inline constexpr double kCenterFloor = 0.1;

struct SvddConfig {
  std::vector<std::size_t> widths{64, 32};  // hidden widths; last is the output dimension
  double slope = 0.1;                       // leaky-rectifier negative slope
  double weight_decay = 1e-6;               // lambda
};

struct SvddNet {
  SvddConfig config;
  std::size_t input_dim = 0;
  std::vector<Parameter> layers;  // weights only
  Matrix center;                  // 1 x output_dim; empty until initialized
  bool trained = false;

  static SvddNet init(std::size_t input_dim, const SvddConfig& cfg, Rng& rng) {
    if (input_dim == 0 || cfg.widths.empty()) throw ConfigError("svdd: need input and at least one layer");
    for (std::size_t w : cfg.widths)
      if (w == 0) throw ConfigError("svdd: layer widths must be positive");
    if (cfg.weight_decay < 0.0) throw ConfigError("svdd: weight decay must be non-negative");
    SvddNet net;
    net.config = cfg;
    net.input_dim = input_dim;
    std::size_t fan_in = input_dim;
    for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
      net.layers.emplace_back("svdd.layer" + std::to_string(i), fan_in_uniform(rng, fan_in, cfg.widths[i]));
      fan_in = cfg.widths[i];
    }
    return net;
  }

  std::size_t output_dim() const { return config.widths.back(); }
  bool has_center() const { return !center.empty(); }

  ParameterList parameters() {
    ParameterList out;
    for (Parameter& p : layers) out.push_back(&p);
    return out;
  }
};

// Row-major flattening of an embedding into one input sample.
inline Matrix flatten_embedding(const Matrix& r) { return flatten(r); }

// Leaky-rectified hidden layers, linear output layer.
inline Var svdd_forward(const std::vector<Var>& layers, const Var& x, double slope) {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = ad::matmul(h, layers[i]);
    if (i + 1 < layers.size()) h = ad::leaky_relu(h, slope);
  }
  return h;
}

inline void check_svdd_input(const SvddNet& net, const Matrix& x) {
  if (x.rows() != 1 || x.cols() != net.input_dim) {
    throw DimensionError("svdd: sample " + x.shape() + " but network expects 1x" + std::to_string(net.input_dim));
  }
}

inline Matrix svdd_map(const SvddNet& net, const Matrix& x) {
  check_svdd_input(net, x);
  Matrix h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    h = matmul(h, net.layers[i].value);
    if (i + 1 < net.layers.size()) {
      const double slope = net.config.slope;
      h = map(h, [slope](double v) { return v > 0.0 ? v : slope * v; });
    }
  }
  return h;
}

// Mean image of the training samples under the current weights, with each
// coordinate pushed to at least 0.1 in magnitude (sign kept, zero -> +0.1).
inline Matrix init_center(SvddNet& net, const std::vector<Matrix>& samples) {
  if (samples.empty()) throw DataError("init_center: empty training set");
  Matrix c(1, net.output_dim());
  for (const Matrix& x : samples) c += svdd_map(net, x);
  for (double& v : c.data()) {
    v /= static_cast<double>(samples.size());
    if (std::abs(v) < kCenterFloor) v = v < 0.0 ? -kCenterFloor : kCenterFloor;
  }
  net.center = c;
  return c;
}

// Mean squared distance to the center over `samples`, optionally plus the
// (lambda/2)||W||^2 regularizer, recorded on `tape`.
inline Var svdd_objective(Tape& tape, SvddNet& net, const std::vector<Matrix>& samples, bool include_decay) {
  if (!net.has_center()) throw ContractError("svdd: center not initialized");
  std::vector<Var> layers;
  for (Parameter& p : net.layers) layers.push_back(tape.param(p));
  const Var c = tape.constant(net.center);
  Var total = tape.constant(Matrix(1, 1));
  for (const Matrix& x : samples) {
    check_svdd_input(net, x);
    const Var d = ad::sub(svdd_forward(layers, tape.constant(x), net.config.slope), c);
    total = ad::add(total, ad::squared_frobenius(d));
  }
  Var loss = ad::scale(total, 1.0 / static_cast<double>(samples.size()));
  if (include_decay) {
    for (const Var& w : layers)
      loss = ad::add(loss, ad::scale(ad::squared_frobenius(w), 0.5 * net.config.weight_decay));
  }
  return loss;
}

// Minimizes the mean squared distance to the fixed center; lambda enters as
// decoupled weight decay on every layer.
inline LossTrace train_svdd(SvddNet& net, const std::vector<Matrix>& samples, const TrainOptions& opt) {
  if (!net.has_center()) throw ContractError("train_svdd: center not initialized");
  if (samples.empty()) throw DataError("train_svdd: empty training set");
  for (const Matrix& x : samples) check_svdd_input(net, x);
  LossTrace trace;
  net.trained = true;
  if (opt.epochs == 0) return trace;
  Adam adam(net.parameters(), {.learning_rate = opt.learning_rate, .weight_decay = net.config.weight_decay});
  Rng rng(opt.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = std::max<std::size_t>(1, opt.batch_size);
  const ParameterList plist = net.parameters();
  std::vector<Matrix> chunk;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t e = std::min(order.size(), b + batch);
      chunk.clear();
      for (std::size_t i = b; i < e; ++i) chunk.push_back(samples[order[i]]);
      zero_grad(plist);
      Tape tape;
      const Var loss = svdd_objective(tape, net, chunk, false);
      total += loss.value()[0] * static_cast<double>(e - b);
      tape.backward(loss);
      adam.step();
    }
    const double mean = total / static_cast<double>(samples.size());
    if (!std::isfinite(mean)) throw NumericError("svdd training loss is not finite");
    trace.push_back(mean);
  }
  return trace;
}

// Squared distance of the mapped sample to the center.
inline double score(const SvddNet& net, const Matrix& x) {
  if (!net.trained || !net.has_center()) throw ContractError("score: network is not trained");
  return squared_distance(svdd_map(net, x), net.center);
}

// Empirical q-quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile: empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("quantile: q must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

inline double calibrate_threshold(const SvddNet& net, const std::vector<Matrix>& calibration, double q) {
  if (calibration.empty()) throw DataError("calibrate_threshold: empty calibration set");
  std::vector<double> scores;
  scores.reserve(calibration.size());
  for (const Matrix& x : calibration) scores.push_back(score(net, x));
  return quantile(std::move(scores), q);
}

struct DetectionResult {
  std::size_t segment = 0;
  double score = 0.0;
  double threshold = 0.0;
  int label = 0;
};

inline DetectionResult decide(std::size_t segment, double s, double threshold) {
  return {segment, s, threshold, s > threshold ? 1 : 0};
}

inline DetectionResult detect(const SvddNet& net, const Matrix& x, double threshold, std::size_t segment = 0) {
  return decide(segment, score(net, x), threshold);
}

}  // namespace dgs

#pragma once

// Predictive transformer encoder over a segment's sensor x time matrix.
// Attention runs across sensors: each sensor row is a query, keys and values
// are projections of every sensor's window. The encoder output U feeds a
// linear decoder trained to predict the following window.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "dgs/autodiff.hpp"
#include "dgs/data.hpp"
#include "dgs/optimizer.hpp"
#include "dgs/random.hpp"

namespace dgs {

struct TemporalConfig {
  std::size_t window = 30;     // L_x
  std::size_t heads = 4;       // h
  std::size_t head_dim = 8;    // d
  std::size_t model_dim = 32;  // d_model
  bool positional_encoding = false;
};

struct TrainOptions {
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
};

using LossTrace = std::vector<double>;

struct TemporalEncoderParams {
  TemporalConfig config;
  std::size_t sensors = 0;
  std::vector<Parameter> query, key, value;  // per head, window x head_dim
  Parameter output;                          // heads*head_dim x model_dim
  Parameter ff1, ff2;                        // model_dim x model_dim
  Parameter ff_bias1, ff_bias2;              // sensors x model_dim
  Parameter predict;                         // model_dim x window
  Parameter predict_bias;                    // sensors x window

  static TemporalEncoderParams init(std::size_t sensors, const TemporalConfig& cfg, Rng& rng) {
    if (sensors == 0 || cfg.window == 0 || cfg.heads == 0 || cfg.head_dim == 0 ||
        cfg.model_dim == 0) {
      throw ConfigError("temporal encoder: all dimensions must be positive");
    }
    TemporalEncoderParams p;
    p.config = cfg;
    p.sensors = sensors;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const std::string suffix = std::to_string(h);
      p.query.emplace_back("temporal.query" + suffix, fan_in_uniform(rng, cfg.window, cfg.head_dim));
      p.key.emplace_back("temporal.key" + suffix, fan_in_uniform(rng, cfg.window, cfg.head_dim));
      p.value.emplace_back("temporal.value" + suffix, fan_in_uniform(rng, cfg.window, cfg.head_dim));
    }
    p.output = Parameter("temporal.output", fan_in_uniform(rng, cfg.heads * cfg.head_dim, cfg.model_dim));
    p.ff1 = Parameter("temporal.ff1", fan_in_uniform(rng, cfg.model_dim, cfg.model_dim));
    p.ff2 = Parameter("temporal.ff2", fan_in_uniform(rng, cfg.model_dim, cfg.model_dim));
    p.ff_bias1 = Parameter("temporal.ff_bias1", Matrix(sensors, cfg.model_dim));
    p.ff_bias2 = Parameter("temporal.ff_bias2", Matrix(sensors, cfg.model_dim));
    p.predict = Parameter("temporal.predict", fan_in_uniform(rng, cfg.model_dim, cfg.window));
    p.predict_bias = Parameter("temporal.predict_bias", Matrix(sensors, cfg.window));
    return p;
  }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    for (auto* group : {&self.query, &self.key, &self.value})
      for (auto& p : *group) f(p);
    for (auto* p : {&self.output, &self.ff1, &self.ff2, &self.ff_bias1, &self.ff_bias2,
                    &self.predict, &self.predict_bias})
      f(*p);
  }

  ParameterList parameters() {
    ParameterList out;
    visit(*this, [&](Parameter& p) { out.push_back(&p); });
    return out;
  }

  std::vector<const Parameter*> parameters() const {
    std::vector<const Parameter*> out;
    visit(*this, [&](const Parameter& p) { out.push_back(&p); });
    return out;
  }
};

struct TemporalEmbedding {
  Matrix U;  // sensors x model_dim
  std::size_t segment = 0;
};

// Tape views of the encoder parameters.
struct TemporalVars {
  std::vector<Var> query, key, value;
  Var output, ff1, ff2, ff_bias1, ff_bias2, predict, predict_bias;
};

inline TemporalVars bind(Tape& tape, TemporalEncoderParams& p) {
  TemporalVars v;
  for (std::size_t h = 0; h < p.query.size(); ++h) {
    v.query.push_back(tape.param(p.query[h]));
    v.key.push_back(tape.param(p.key[h]));
    v.value.push_back(tape.param(p.value[h]));
  }
  v.output = tape.param(p.output);
  v.ff1 = tape.param(p.ff1);
  v.ff2 = tape.param(p.ff2);
  v.ff_bias1 = tape.param(p.ff_bias1);
  v.ff_bias2 = tape.param(p.ff_bias2);
  v.predict = tape.param(p.predict);
  v.predict_bias = tape.param(p.predict_bias);
  return v;
}

inline TemporalVars bind_frozen(Tape& tape, const TemporalEncoderParams& p) {
  TemporalVars v;
  for (std::size_t h = 0; h < p.query.size(); ++h) {
    v.query.push_back(tape.constant(p.query[h].value));
    v.key.push_back(tape.constant(p.key[h].value));
    v.value.push_back(tape.constant(p.value[h].value));
  }
  v.output = tape.constant(p.output.value);
  v.ff1 = tape.constant(p.ff1.value);
  v.ff2 = tape.constant(p.ff2.value);
  v.ff_bias1 = tape.constant(p.ff_bias1.value);
  v.ff_bias2 = tape.constant(p.ff_bias2.value);
  v.predict = tape.constant(p.predict.value);
  v.predict_bias = tape.constant(p.predict_bias.value);
  return v;
}

// Fixed sinusoid over the time axis, identical for every sensor row.
inline Matrix positional_encoding(std::size_t sensors, std::size_t window) {
  Matrix pe(sensors, window);
  for (std::size_t j = 0; j < window; ++j) {
    const double v = std::sin(std::numbers::pi * static_cast<double>(j) / static_cast<double>(window));
    for (std::size_t i = 0; i < sensors; ++i) pe(i, j) = v;
  }
  return pe;
}

namespace detail {
inline void check_temporal_input(const Matrix& T, std::size_t window) {
  if (T.cols() != window) {
    throw DimensionError("temporal encoder: input " + T.shape() + " does not have window length " +
                         std::to_string(window));
  }
}
}  // namespace detail

// softmax((T Wq)(T Wk)^T / sqrt(L)) (T Wv)
inline Var attention_head(const Var& T, const Var& wq, const Var& wk, const Var& wv) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(T.cols()));
  const Var q = ad::matmul(T, wq);
  const Var k = ad::matmul(T, wk);
  const Var v = ad::matmul(T, wv);
  const Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), scale);
  return ad::matmul(ad::softmax_rows(scores), v);
}

// Sensor-by-sensor attention weights of one head (rows sum to one).
inline Matrix attention_weights(const Matrix& T, const Matrix& wq, const Matrix& wk) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(T.cols()));
  return softmax_rows(scale * matmul_nt(matmul(T, wq), matmul(T, wk)));
}

inline Matrix attention_head(const Matrix& T, const Matrix& wq, const Matrix& wk, const Matrix& wv) {
  return matmul(attention_weights(T, wq, wk), matmul(T, wv));
}

// U = T' + relu(T' W1 + b1) W2 + b2, with T' = concat(heads) Wo.
inline Var encode(const TemporalVars& v, const Var& T) {
  std::vector<Var> heads;
  heads.reserve(v.query.size());
  for (std::size_t h = 0; h < v.query.size(); ++h)
    heads.push_back(attention_head(T, v.query[h], v.key[h], v.value[h]));
  const Var mixed = ad::matmul(ad::concat_cols(heads), v.output);
  const Var hidden = ad::relu(ad::add(ad::matmul(mixed, v.ff1), v.ff_bias1));
  return ad::add(mixed, ad::add(ad::matmul(hidden, v.ff2), v.ff_bias2));
}

inline Var predict_next(const TemporalVars& v, const Var& U) {
  return ad::add(ad::matmul(U, v.predict), v.predict_bias);
}

inline Var encoder_input(Tape& tape, const TemporalEncoderParams& p, const Matrix& T) {
  detail::check_temporal_input(T, p.config.window);
  if (T.rows() != p.sensors) {
    throw DimensionError("temporal encoder: input " + T.shape() + " for " +
                         std::to_string(p.sensors) + " sensors");
  }
  if (p.config.positional_encoding) return tape.constant(T + positional_encoding(T.rows(), T.cols()));
  return tape.constant(T);
}

inline TemporalEmbedding encode(const Matrix& T, const TemporalEncoderParams& p,
                                std::size_t segment = 0) {
  Tape tape;
  const TemporalVars v = bind_frozen(tape, p);
  return {encode(v, encoder_input(tape, p, T)).value(), segment};
}

inline Matrix predict_next(const Matrix& U, const TemporalEncoderParams& p) {
  if (U.rows() != p.sensors || U.cols() != p.config.model_dim) {
    throw DimensionError("predict_next: embedding " + U.shape() + " does not match " +
                         std::to_string(p.sensors) + "x" + std::to_string(p.config.model_dim));
  }
  return matmul(U, p.predict.value) + p.predict_bias.value;
}

// ||next - predict(encode(T))||_F^2 recorded on `tape` with trainable params.
inline Var prediction_loss(Tape& tape, const TemporalVars& v, const TemporalEncoderParams& p,
                           const Matrix& T, const Matrix& next) {
  const Var U = encode(v, encoder_input(tape, p, T));
  return ad::squared_frobenius(ad::sub(tape.constant(next), predict_next(v, U)));
}

struct PredictionPair {
  const Matrix* input;
  const Matrix* target;
};

inline std::vector<PredictionPair> prediction_pairs(const std::vector<Segment>& segments) {
  std::vector<PredictionPair> pairs;
  for (const Segment& s : segments)
    if (s.successor) pairs.push_back({&s.T, &*s.successor});
  return pairs;
}

// Mean per-segment prediction loss without gradient bookkeeping.
inline double temporal_loss(const std::vector<PredictionPair>& pairs, const TemporalEncoderParams& p) {
  if (pairs.empty()) throw DataError("temporal loss: no segments with a successor window");
  double total = 0.0;
  for (const auto& pr : pairs) {
    const TemporalEmbedding e = encode(*pr.input, p);
    total += squared_distance(predict_next(e.U, p), *pr.target);
  }
  return total / static_cast<double>(pairs.size());
}

// Minimizes the mean squared next-window prediction error with minibatch Adam.
// Returns the mean training loss of each epoch.
inline LossTrace train_temporal(const std::vector<PredictionPair>& pairs, TemporalEncoderParams& params,
                                const TrainOptions& opt) {
  if (pairs.empty()) throw DataError("train_temporal: no segments with a successor window");
  LossTrace trace;
  if (opt.epochs == 0) return trace;
  Adam adam(params.parameters(), {.learning_rate = opt.learning_rate, .weight_decay = opt.weight_decay});
  Rng rng(opt.seed);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = std::max<std::size_t>(1, opt.batch_size);
  const ParameterList plist = params.parameters();
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t e = std::min(order.size(), b + batch);
      zero_grad(plist);
      for (std::size_t i = b; i < e; ++i) {
        const PredictionPair& pr = pairs[order[i]];
        Tape tape;
        const TemporalVars v = bind(tape, params);
        const Var loss = prediction_loss(tape, v, params, *pr.input, *pr.target);
        total += loss.value()[0];
        tape.backward(loss);
      }
      adam.step(1.0 / static_cast<double>(e - b));
    }
    const double mean = total / static_cast<double>(pairs.size());
    if (!std::isfinite(mean)) throw NumericError("temporal training loss is not finite");
    trace.push_back(mean);
  }
  return trace;
}

}  // namespace dgs

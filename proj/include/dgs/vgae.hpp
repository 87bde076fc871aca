#pragma once

// Two-layer GCN variational graph autoencoder over weighted attributed graphs.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "dgs/autodiff.hpp"
#include "dgs/graph.hpp"
#include "dgs/optimizer.hpp"
#include "dgs/random.hpp"
#include "dgs/temporal.hpp"

namespace dgs {

inline constexpr double kDegreeFloor = 1e-8;
inline constexpr double kLogVarLimit = 10.0;

struct VgaeConfig {
  std::size_t hidden_dim = 64;
  std::size_t embedding_dim = 16;
  double kl_weight = 1.0;  // beta
};

struct VgaeParams {
  VgaeConfig config;
  std::size_t input_dim = 0;
  Parameter layer0;  // input_dim x hidden_dim
  Parameter layer1;  // hidden_dim x 2*embedding_dim: [mean | log-variance]

  static VgaeParams init(std::size_t input_dim, const VgaeConfig& cfg, Rng& rng) {
    if (input_dim == 0 || cfg.hidden_dim == 0 || cfg.embedding_dim == 0) {
      throw ConfigError("vgae: all dimensions must be positive");
    }
    if (cfg.kl_weight < 0.0) throw ConfigError("vgae: KL weight must be non-negative");
    VgaeParams p;
    p.config = cfg;
    p.input_dim = input_dim;
    p.layer0 = Parameter("vgae.layer0", fan_in_uniform(rng, input_dim, cfg.hidden_dim));
    // Mean columns get fan-in init; log-variance columns start at zero so
    // sigma = 1 and the clamp is inactive at the first step.
    Matrix w1(cfg.hidden_dim, 2 * cfg.embedding_dim);
    const Matrix mean_cols = fan_in_uniform(rng, cfg.hidden_dim, cfg.embedding_dim);
    for (std::size_t i = 0; i < cfg.hidden_dim; ++i)
      for (std::size_t j = 0; j < cfg.embedding_dim; ++j) w1(i, j) = mean_cols(i, j);
    p.layer1 = Parameter("vgae.layer1", std::move(w1));
    return p;
  }

  ParameterList parameters() { return {&layer0, &layer1}; }
};

struct SpatioTemporalEmbedding {
  Matrix r;        // n x embedding_dim
  Matrix mean;     // mu
  Matrix log_var;  // clamped to [-10, 10]
  std::size_t segment = 0;
};

// D^-1/2 (W + I) D^-1/2. Degrees are row sums of |W + I| so negative
// edges cannot cancel the self-loop; the 1e-8 floor then never binds.
inline Matrix normalize_adjacency(const Matrix& weights) {
  if (weights.rows() != weights.cols()) {
    throw DimensionError("normalize_adjacency: matrix " + weights.shape() + " is not square");
  }
  const std::size_t n = weights.rows();
  Matrix with_loops = weights + Matrix::identity(n);
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (double v : with_loops.row(i)) deg += std::abs(v);
    inv_sqrt[i] = 1.0 / std::sqrt(std::max(deg, kDegreeFloor));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) with_loops(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  return with_loops;
}

// Binary support of the weighted graph with self-loops; the reconstruction target.
inline Matrix reconstruction_target(const Matrix& weights) {
  Matrix out = map(weights, [](double w) { return w != 0.0 ? 1.0 : 0.0; });
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) = 1.0;
  return out;
}

struct VgaeVars {
  Var mean, log_var, r;
};

// Encoder forward on tape. `noise` (n x embedding_dim) is the
// reparameterization draw; pass nullopt for the deterministic r = mu.
inline VgaeVars encode_vgae(Tape& tape, const Var& layer0, const Var& layer1, const Matrix& normalized,
                            const Matrix& attributes, std::size_t embedding_dim,
                            const std::optional<Matrix>& noise) {
  const Var N = tape.constant(normalized);
  const Var X = tape.constant(attributes);
  const Var hidden = ad::relu(ad::matmul(N, ad::matmul(X, layer0)));
  const Var heads = ad::matmul(N, ad::matmul(hidden, layer1));
  VgaeVars out;
  out.mean = ad::slice_cols(heads, 0, embedding_dim);
  out.log_var = ad::clamp(ad::slice_cols(heads, embedding_dim, 2 * embedding_dim), -kLogVarLimit, kLogVarLimit);
  if (noise) {
    const Var sigma = ad::exp(ad::scale(out.log_var, 0.5));
    out.r = ad::add(out.mean, ad::hadamard(sigma, tape.constant(*noise)));
  } else {
    out.r = out.mean;
  }
  return out;
}

inline void check_vgae_input(const WeightedAttributedGraph& g, const VgaeParams& p) {
  if (g.attributes.cols() != p.input_dim) {
    throw DimensionError("vgae: attributes " + g.attributes.shape() + " but encoder expects " +
                         std::to_string(p.input_dim) + " columns");
  }
  if (g.weights.rows() != g.attributes.rows() || g.weights.cols() != g.attributes.rows()) {
    throw DimensionError("vgae: adjacency " + g.weights.shape() + " for attributes " + g.attributes.shape());
  }
}

inline SpatioTemporalEmbedding encode_vgae(const WeightedAttributedGraph& g, const VgaeParams& p,
                                           const std::optional<Matrix>& noise = std::nullopt) {
  check_vgae_input(g, p);
  Tape tape;
  const VgaeVars v = encode_vgae(tape, tape.constant(p.layer0.value), tape.constant(p.layer1.value),
                                 normalize_adjacency(g.weights), g.attributes, p.config.embedding_dim, noise);
  return {v.r.value(), v.mean.value(), v.log_var.value(), g.segment};
}

// sigmoid(r r^T)
inline Var decode_vgae(const Var& r) { return ad::sigmoid(ad::matmul(r, ad::transpose(r))); }

inline Matrix decode_vgae(const Matrix& r) { return map(matmul_nt(r, r), logistic); }

// 0.5 * sum(mu^2 + sigma^2 - log sigma^2 - 1)
inline Var kl_divergence(const Var& mean, const Var& log_var) {
  const Var terms = ad::sub(ad::add(ad::hadamard(mean, mean), ad::exp(log_var)), ad::add_scalar(log_var, 1.0));
  return ad::scale(ad::sum(terms), 0.5);
}

inline double kl_divergence(const Matrix& mean, const Matrix& log_var) {
  require_same_shape(mean, log_var, "kl_divergence");
  double s = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i)
    s += mean[i] * mean[i] + std::exp(log_var[i]) - log_var[i] - 1.0;
  return 0.5 * s;
}

// ||target - A_hat||^2 + beta * KL
inline Var vgae_loss(Tape& tape, const Matrix& target, const Var& reconstructed, const VgaeVars& enc,
                     double kl_weight) {
  const Var recon = ad::squared_frobenius(ad::sub(tape.constant(target), reconstructed));
  return ad::add(recon, ad::scale(kl_divergence(enc.mean, enc.log_var), kl_weight));
}

inline double vgae_loss(const WeightedAttributedGraph& g, const SpatioTemporalEmbedding& e,
                        const Matrix& reconstructed, double kl_weight) {
  return squared_distance(reconstruction_target(g.weights), reconstructed) +
         kl_weight * kl_divergence(e.mean, e.log_var);
}

// Trains on every graph once per epoch in shuffled minibatches, sampling
// fresh reparameterization noise for each graph visit.
inline LossTrace train_vgae(const std::vector<WeightedAttributedGraph>& graphs, VgaeParams& params,
                            const TrainOptions& opt) {
  if (graphs.empty()) throw DataError("train_vgae: no training graphs");
  for (const auto& g : graphs) check_vgae_input(g, params);
  LossTrace trace;
  if (opt.epochs == 0) return trace;
  std::vector<Matrix> normalized, targets;
  normalized.reserve(graphs.size());
  targets.reserve(graphs.size());
  for (const auto& g : graphs) {
    normalized.push_back(normalize_adjacency(g.weights));
    targets.push_back(reconstruction_target(g.weights));
  }
  Adam adam(params.parameters(), {.learning_rate = opt.learning_rate, .weight_decay = opt.weight_decay});
  Rng rng(opt.seed);
  std::vector<std::size_t> order(graphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = std::max<std::size_t>(1, opt.batch_size);
  const std::size_t emb = params.config.embedding_dim;
  const ParameterList plist = params.parameters();
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t e = std::min(order.size(), b + batch);
      zero_grad(plist);
      for (std::size_t i = b; i < e; ++i) {
        const std::size_t gi = order[i];
        const std::size_t n = graphs[gi].attributes.rows();
        Tape tape;
        const VgaeVars enc = encode_vgae(tape, tape.param(params.layer0), tape.param(params.layer1),
                                         normalized[gi], graphs[gi].attributes, emb, rng.normal_matrix(n, emb));
        const Var loss = vgae_loss(tape, targets[gi], decode_vgae(enc.r), enc, params.config.kl_weight);
        total += loss.value()[0];
        tape.backward(loss);
      }
      adam.step(1.0 / static_cast<double>(e - b));
    }
    const double mean = total / static_cast<double>(graphs.size());
    if (!std::isfinite(mean)) throw NumericError("vgae training loss is not finite");
    trace.push_back(mean);
  }
  return trace;
}

}  // namespace dgs

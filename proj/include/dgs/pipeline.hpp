#pragma once

// Stage-wise training and scoring of the full detector:
// temporal encoder -> weighted attributed graph -> VGAE -> deep SVDD.
// Each stage is trained to convergence and frozen before the next starts.
// Ablation switches replace a stage with its identity substitute.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dgs/config.hpp"
#include "dgs/data.hpp"
#include "dgs/graph.hpp"
#include "dgs/metrics.hpp"
#include "dgs/random.hpp"
#include "dgs/svdd.hpp"
#include "dgs/temporal.hpp"
#include "dgs/vgae.hpp"

namespace dgs {

struct Model {
  PipelineConfig config;
  SensorTopology topology;
  std::optional<NormalizationStats> normalization;
  std::optional<TemporalEncoderParams> temporal;
  std::optional<VgaeParams> vgae;
  std::optional<NormalizationStats> detector_scaling;  // per-feature z-score of SVDD inputs
  SvddNet svdd;
  double threshold = 0.0;
};

struct TrainingReport {
  LossTrace temporal_loss;
  LossTrace vgae_loss;
  LossTrace svdd_loss;
  std::size_t training_rows = 0;
  std::size_t filtered_rows = 0;       // anomalous rows excluded from training
  std::size_t filtered_segments = 0;   // windows dropped because they touch those rows
  std::size_t fit_segments = 0;
  std::size_t calibration_segments = 0;
  double threshold = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline void log_line(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << '\n';
}

inline TrainOptions stage_options(const StageTraining& s, std::uint64_t seed, double decay = 0.0) {
  return {.epochs = s.epochs, .learning_rate = s.learning_rate, .batch_size = s.batch_size,
          .weight_decay = decay, .seed = seed};
}

}  // namespace detail

// Node attributes fed to the graph stage: U_t, or the raw window when the
// temporal stage is disabled.
inline Matrix node_attributes(const Model& m, const Matrix& T, std::size_t segment = 0) {
  if (m.config.use_temporal) return encode(T, *m.temporal, segment).U;
  return T;
}

inline WeightedAttributedGraph segment_graph(const Model& m, const Matrix& attributes, std::size_t segment,
                                             std::vector<std::size_t>* degenerate = nullptr) {
  if (m.config.use_graph_weighting) {
    const TypeSimilarity sim = type_similarity(type_embeddings(attributes, m.topology));
    if (degenerate) degenerate->insert(degenerate->end(), sim.degenerate_types.begin(), sim.degenerate_types.end());
    return build_graph(m.topology.adjacency, expand_similarity(sim, m.topology), attributes, segment);
  }
  return weighted_graph(attributes, m.topology, false, segment);
}

inline Matrix pool(const PipelineConfig& c, const Matrix& embedding) {
  return c.pooling == Pooling::Flatten ? flatten_embedding(embedding) : column_mean(embedding);
}

inline NormalizationStats fit_feature_scaling(const std::vector<Matrix>& samples) {
  if (samples.empty()) throw DataError("fit_feature_scaling: no samples");
  const std::size_t d = samples.front().size();
  NormalizationStats st{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (const Matrix& s : samples)
    for (std::size_t j = 0; j < d; ++j) st.mean[j] += s[j];
  for (double& v : st.mean) v /= static_cast<double>(samples.size());
  for (const Matrix& s : samples)
    for (std::size_t j = 0; j < d; ++j) st.stddev[j] += (s[j] - st.mean[j]) * (s[j] - st.mean[j]);
  for (double& v : st.stddev) v = std::max(std::sqrt(v / static_cast<double>(samples.size())), kStdFloor);
  return st;
}

inline Matrix scale_features(const NormalizationStats& st, Matrix x) {
  if (x.size() != st.mean.size()) {
    throw DimensionError("scale_features: sample " + x.shape() + " for " + std::to_string(st.mean.size()) + " features");
  }
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - st.mean[j]) / st.stddev[j];
  return x;
}

// SVDD input for one window of already-normalized data.
inline Matrix detector_input(const Model& m, const Matrix& T, std::size_t segment = 0) {
  const Matrix attributes = node_attributes(m, T, segment);
  Matrix x = m.config.use_vgae ? pool(m.config, encode_vgae(segment_graph(m, attributes, segment), *m.vgae).mean)
                               : pool(m.config, attributes);
  return m.detector_scaling ? scale_features(*m.detector_scaling, std::move(x)) : x;
}

struct TrainResult {
  Model model;
  TrainingReport report;
};

inline TrainResult train_model(const PipelineConfig& config, const SensorTopology& topology,
                               const RawStream& raw, std::ostream* log = nullptr) {
  config.validate();
  topology.validate();
  if (raw.values.cols() != topology.n()) {
    throw DimensionError("train: stream has " + std::to_string(raw.values.cols()) + " sensors, topology " +
                         std::to_string(topology.n()));
  }
  TrainResult out;
  Model& m = out.model;
  TrainingReport& rep = out.report;
  m.config = config;
  m.topology = topology;

  const auto rows = static_cast<std::size_t>(std::floor(config.train_fraction * static_cast<double>(raw.length())));
  RawStream stream = slice_stream(raw, 0, rows);
  rep.training_rows = stream.length();
  rep.filtered_rows = stream.anomaly_count();
  if (rep.filtered_rows > 0) {
    const std::string msg = "warning: " + std::to_string(rep.filtered_rows) +
                            " anomalous training rows present; windows touching them are excluded";
    rep.warnings.push_back(msg);
    detail::log_line(log, msg);
  }

  if (config.normalize) {
    // Statistics come from normal rows only.
    std::vector<std::size_t> normal_rows;
    for (std::size_t t = 0; t < stream.length(); ++t)
      if (stream.labels[t] == 0) normal_rows.push_back(t);
    if (normal_rows.empty()) throw DataError("train: empty training set after filtering anomalous rows");
    RawStream normal;
    normal.values = Matrix(normal_rows.size(), stream.values.cols());
    for (std::size_t i = 0; i < normal_rows.size(); ++i)
      for (std::size_t s = 0; s < stream.values.cols(); ++s) normal.values(i, s) = stream.values(normal_rows[i], s);
    normal.labels.assign(normal_rows.size(), 0);
    m.normalization = fit_normalizer(normal, 0, normal.length());
    stream = apply_normalizer(*m.normalization, std::move(stream));
  }

  std::vector<Segment> all = segment_stream(stream, config.window, config.stride);
  std::vector<Segment> segments;
  for (Segment& s : all) {
    if (s.segment_label != 0) {
      ++rep.filtered_segments;
      continue;
    }
    if (s.successor) {
      const std::size_t next = s.start + config.window;
      const bool tainted = std::any_of(stream.labels.begin() + static_cast<std::ptrdiff_t>(next),
                                       stream.labels.begin() + static_cast<std::ptrdiff_t>(next + config.window),
                                       [](int l) { return l != 0; });
      if (tainted) s.successor.reset();
    }
    segments.push_back(std::move(s));
  }
  if (segments.empty()) throw DataError("train: empty training set after filtering anomalous rows");

  auto calib = static_cast<std::size_t>(std::floor(config.calibration_fraction * static_cast<double>(segments.size())));
  if (calib >= segments.size()) calib = segments.size() - 1;
  const std::size_t fit = segments.size() - calib;
  rep.fit_segments = fit;
  rep.calibration_segments = calib;
  const std::vector<Segment> fit_segments(segments.begin(), segments.begin() + static_cast<std::ptrdiff_t>(fit));

  Rng seeds(config.seed);
  Rng init_rng(seeds.next_seed());

  // Stage 1: temporal encoder.
  if (config.use_temporal) {
    TemporalConfig tc = config.temporal;
    tc.window = config.window;
    m.temporal = TemporalEncoderParams::init(topology.n(), tc, init_rng);
    const auto pairs = prediction_pairs(fit_segments);
    if (pairs.empty()) throw DataError("train: no training window has a successor window to predict");
    detail::log_line(log, "training temporal encoder on " + std::to_string(pairs.size()) + " windows");
    rep.temporal_loss = train_temporal(pairs, *m.temporal, detail::stage_options(config.temporal_training, seeds.next_seed()));
  } else {
    seeds.next_seed();
  }

  std::vector<Matrix> attributes;
  attributes.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) attributes.push_back(node_attributes(m, segments[i].T, i));

  // Stage 2 + 3: weighted graphs and VGAE.
  std::vector<Matrix> samples;
  samples.reserve(segments.size());
  if (config.use_vgae) {
    std::vector<WeightedAttributedGraph> graphs;
    graphs.reserve(segments.size());
    std::vector<std::size_t> degenerate;
    for (std::size_t i = 0; i < segments.size(); ++i) graphs.push_back(segment_graph(m, attributes[i], i, &degenerate));
    if (!degenerate.empty()) {
      const std::string msg = "warning: " + std::to_string(degenerate.size()) +
                              " zero-norm type embeddings treated as dissimilar to other types";
      rep.warnings.push_back(msg);
      detail::log_line(log, msg);
    }
    m.vgae = VgaeParams::init(attributes.front().cols(), config.vgae, init_rng);
    const std::vector<WeightedAttributedGraph> fit_graphs(graphs.begin(), graphs.begin() + static_cast<std::ptrdiff_t>(fit));
    detail::log_line(log, "training graph autoencoder on " + std::to_string(fit_graphs.size()) + " graphs");
    rep.vgae_loss = train_vgae(fit_graphs, *m.vgae, detail::stage_options(config.vgae_training, seeds.next_seed()));
    for (const auto& g : graphs) samples.push_back(pool(config, encode_vgae(g, *m.vgae).mean));
  } else {
    seeds.next_seed();
    for (const auto& a : attributes) samples.push_back(pool(config, a));
  }

  // Stage 4: hypersphere.
  if (config.standardize_detector_input) {
    m.detector_scaling =
        fit_feature_scaling(std::vector<Matrix>(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(fit)));
    for (Matrix& s : samples) s = scale_features(*m.detector_scaling, std::move(s));
  }
  const std::vector<Matrix> fit_samples(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(fit));
  const std::vector<Matrix> calib_samples =
      calib > 0 ? std::vector<Matrix>(samples.begin() + static_cast<std::ptrdiff_t>(fit), samples.end()) : fit_samples;
  m.svdd = SvddNet::init(samples.front().cols(), config.svdd, init_rng);
  init_center(m.svdd, fit_samples);
  detail::log_line(log, "training hypersphere on " + std::to_string(fit_samples.size()) + " samples");
  rep.svdd_loss = train_svdd(m.svdd, fit_samples, detail::stage_options(config.svdd_training, seeds.next_seed()));
  m.threshold = calibrate_threshold(m.svdd, calib_samples, config.quantile);
  rep.threshold = m.threshold;
  return out;
}

struct SegmentScore {
  std::size_t index = 0;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  double score = 0.0;
  int label = 0;        // predicted
  int truth = 0;        // ground-truth segment label
};

struct TimestampScore {
  std::size_t index = 0;
  double score = 0.0;
  int label = 0;
  int truth = 0;
};

struct ScoreResult {
  double threshold = 0.0;
  std::vector<SegmentScore> segments;
  std::vector<TimestampScore> timestamps;  // covered timestamps only, ascending
};

// Scores every window of `raw`. Streams shorter than one window give an
// empty result.
inline ScoreResult score_stream(const Model& m, const RawStream& raw) {
  if (raw.values.cols() != m.topology.n() && raw.length() > 0) {
    throw DimensionError("score: stream has " + std::to_string(raw.values.cols()) + " sensors, model expects " +
                         std::to_string(m.topology.n()));
  }
  ScoreResult out;
  out.threshold = m.threshold;
  if (raw.length() < m.config.window) return out;
  const RawStream stream = m.normalization ? apply_normalizer(*m.normalization, raw) : raw;
  const std::vector<Segment> segments = segment_stream(stream, m.config.window, m.config.stride);
  std::vector<double> ts_score(stream.length(), 0.0);
  std::vector<int> ts_label(stream.length(), 0);
  std::vector<bool> covered(stream.length(), false);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    const DetectionResult d = detect(m.svdd, detector_input(m, s.T, i), m.threshold, i);
    out.segments.push_back({i, s.start, s.end(), d.score, d.label, s.segment_label});
    for (std::size_t t = s.start; t < s.end(); ++t) {
      ts_score[t] = covered[t] ? std::max(ts_score[t], d.score) : d.score;
      ts_label[t] = ts_label[t] | d.label;
      covered[t] = true;
    }
  }
  for (std::size_t t = 0; t < stream.length(); ++t)
    if (covered[t]) out.timestamps.push_back({t, ts_score[t], ts_label[t], stream.labels[t]});
  return out;
}

// Metrics at the configured granularity against the stream's own labels.
inline MetricReport evaluate_scores(const ScoreResult& r, Granularity g) {
  std::vector<int> labels, preds;
  std::vector<double> scores;
  if (g == Granularity::Timestamp) {
    for (const auto& t : r.timestamps) {
      labels.push_back(t.truth);
      preds.push_back(t.label);
      scores.push_back(t.score);
    }
  } else {
    for (const auto& s : r.segments) {
      labels.push_back(s.truth);
      preds.push_back(s.label);
      scores.push_back(s.score);
    }
  }
  return evaluate(labels, scores, preds);
}

}  // namespace dgs

#pragma once

// Point-adjusted precision/recall/F1 and rank-based ROC AUC.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dgs/error.hpp"

namespace dgs {

struct MetricReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::vector<int> adjusted;
};

namespace detail {
inline void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch " + std::to_string(a) + " vs " +
                         std::to_string(b));
  }
}
inline void check_binary(std::span<const int> v, const char* what) {
  for (int x : v)
    if (x != 0 && x != 1) throw DataError(std::string(what) + ": values must be 0 or 1");
}
}  // namespace detail

// Within every maximal run of positive labels, a single positive prediction
// marks the whole run as detected. Predictions outside runs are untouched.
inline std::vector<int> point_adjust(std::span<const int> labels, std::span<const int> predictions) {
  detail::check_aligned(labels.size(), predictions.size(), "point_adjust");
  detail::check_binary(labels, "point_adjust labels");
  detail::check_binary(predictions, "point_adjust predictions");
  std::vector<int> out(predictions.begin(), predictions.end());
  std::size_t i = 0;
  while (i < labels.size()) {
    if (labels[i] == 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool hit = false;
    for (; j < labels.size() && labels[j] == 1; ++j) hit = hit || predictions[j] == 1;
    if (hit) std::fill(out.begin() + static_cast<std::ptrdiff_t>(i), out.begin() + static_cast<std::ptrdiff_t>(j), 1);
    i = j;
  }
  return out;
}

// Confusion-matrix metrics; any 0/0 ratio is reported as 0.
inline MetricReport prf(std::span<const int> labels, std::span<const int> predictions) {
  detail::check_aligned(labels.size(), predictions.size(), "prf");
  detail::check_binary(labels, "prf labels");
  detail::check_binary(predictions, "prf predictions");
  MetricReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) (predictions[i] == 1 ? r.tp : r.fn)++;
    else (predictions[i] == 1 ? r.fp : r.tn)++;
  }
  r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.adjusted.assign(predictions.begin(), predictions.end());
  return r;
}

// Mann-Whitney statistic via average ranks: the probability that a random
// positive outscores a random negative, ties counting one half.
inline double auc(std::span<const int> labels, std::span<const double> scores) {
  detail::check_aligned(labels.size(), scores.size(), "auc");
  detail::check_binary(labels, "auc labels");
  const std::size_t n = labels.size();
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw DataError("auc: labels contain a single class");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of 1-based positive ranks, tied blocks sharing their average rank.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    std::size_t pos_in_block = 0;
    for (std::size_t k = i; k < j; ++k) pos_in_block += labels[order[k]] == 1 ? 1 : 0;
    rank_sum += avg_rank * static_cast<double>(pos_in_block);
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

// Point-adjusted P/R/F1 plus AUC over the raw scores.
inline MetricReport evaluate(std::span<const int> labels, std::span<const double> scores,
                             std::span<const int> predictions) {
  const std::vector<int> adjusted = point_adjust(labels, predictions);
  MetricReport r = prf(labels, adjusted);
  r.auc = auc(labels, scores);
  return r;
}

inline void write_report_text(std::ostream& os, const MetricReport& r) {
  os << "precision " << r.precision << '\n'
     << "recall    " << r.recall << '\n'
     << "f1        " << r.f1 << '\n'
     << "auc       " << r.auc << '\n'
     << "tp=" << r.tp << " fp=" << r.fp << " fn=" << r.fn << " tn=" << r.tn << '\n';
}

inline void write_report_kv(std::ostream& os, const MetricReport& r) {
  os << "precision=" << r.precision << '\n'
     << "recall=" << r.recall << '\n'
     << "f1=" << r.f1 << '\n'
     << "auc=" << r.auc << '\n'
     << "tp=" << r.tp << '\n'
     << "fp=" << r.fp << '\n'
     << "fn=" << r.fn << '\n'
     << "tn=" << r.tn << '\n';
}

}  // namespace dgs

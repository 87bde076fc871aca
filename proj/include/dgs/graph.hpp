#pragma once

// Dynamic weighted attributed graph: physical adjacency reweighted by the
// cosine similarity of per-type mean temporal embeddings.

#include <cmath>
#include <cstddef>
#include <vector>

#include "dgs/data.hpp"
#include "dgs/error.hpp"
#include "dgs/matrix.hpp"

namespace dgs {

struct WeightedAttributedGraph {
  Matrix weights;     // n x n
  Matrix attributes;  // n x d_model
  std::size_t segment = 0;
};

struct TypeSimilarity {
  Matrix similarity;  // k x k
  Matrix type_embeddings;
  std::vector<std::size_t> degenerate_types;  // types whose mean embedding has zero norm
};

// Row t is the mean of the embedding rows of sensors of type t.
inline Matrix type_embeddings(const Matrix& U, const SensorTopology& topo) {
  if (U.rows() != topo.n()) {
    throw DimensionError("type_embeddings: embedding " + U.shape() + " for " +
                         std::to_string(topo.n()) + " sensors");
  }
  Matrix out(topo.k(), U.cols());
  std::vector<std::size_t> count(topo.k(), 0);
  for (std::size_t s = 0; s < topo.n(); ++s) {
    const std::size_t t = topo.type_of[s];
    ++count[t];
    for (std::size_t j = 0; j < U.cols(); ++j) out(t, j) += U(s, j);
  }
  for (std::size_t t = 0; t < topo.k(); ++t) {
    if (count[t] == 0) throw DataError("type_embeddings: type '" + topo.type_names[t] + "' is empty");
    for (std::size_t j = 0; j < U.cols(); ++j) out(t, j) /= static_cast<double>(count[t]);
  }
  return out;
}

// Pairwise cosine similarity. A zero-norm row is similar only to itself.
inline TypeSimilarity type_similarity(const Matrix& embeddings) {
  const std::size_t k = embeddings.rows();
  TypeSimilarity out;
  out.type_embeddings = embeddings;
  out.similarity = Matrix(k, k);
  std::vector<double> norm(k);
  for (std::size_t a = 0; a < k; ++a) {
    double s = 0.0;
    for (double v : embeddings.row(a)) s += v * v;
    norm[a] = std::sqrt(s);
    if (norm[a] == 0.0) out.degenerate_types.push_back(a);
  }
  for (std::size_t a = 0; a < k; ++a) {
    out.similarity(a, a) = 1.0;
    for (std::size_t b = a + 1; b < k; ++b) {
      double c = 0.0;
      if (norm[a] > 0.0 && norm[b] > 0.0) {
        const auto ra = embeddings.row(a);
        const auto rb = embeddings.row(b);
        double dot = 0.0;
        for (std::size_t j = 0; j < ra.size(); ++j) dot += ra[j] * rb[j];
        c = std::clamp(dot / (norm[a] * norm[b]), -1.0, 1.0);
      }
      out.similarity(a, b) = out.similarity(b, a) = c;
    }
  }
  return out;
}

// Sensor-level similarity: entry (i, j) is C[type(i), type(j)].
inline Matrix expand_similarity(const TypeSimilarity& sim, const SensorTopology& topo) {
  if (sim.similarity.rows() != topo.k() || sim.similarity.cols() != topo.k()) {
    throw DimensionError("expand_similarity: similarity " + sim.similarity.shape() + " for " +
                         std::to_string(topo.k()) + " types");
  }
  Matrix out(topo.n(), topo.n());
  for (std::size_t i = 0; i < topo.n(); ++i)
    for (std::size_t j = 0; j < topo.n(); ++j) out(i, j) = sim.similarity(topo.type_of[i], topo.type_of[j]);
  return out;
}

// Weighted adjacency A (.) C_expanded with U as node attributes.
inline WeightedAttributedGraph build_graph(const Matrix& adjacency, const Matrix& expanded,
                                           const Matrix& U, std::size_t segment = 0) {
  require_same_shape(adjacency, expanded, "build_graph");
  if (adjacency.rows() != adjacency.cols()) throw DimensionError("build_graph: adjacency not square");
  if (U.rows() != adjacency.rows()) {
    throw DimensionError("build_graph: attributes " + U.shape() + " for adjacency " + adjacency.shape());
  }
  return {hadamard(adjacency, expanded), U, segment};
}

// Full construction from a temporal embedding. With `weighting` off the
// physical adjacency is used unchanged.
inline WeightedAttributedGraph weighted_graph(const Matrix& U, const SensorTopology& topo, bool weighting,
                                              std::size_t segment = 0) {
  if (!weighting) return build_graph(topo.adjacency, Matrix::ones(topo.n(), topo.n()), U, segment);
  const TypeSimilarity sim = type_similarity(type_embeddings(U, topo));
  return build_graph(topo.adjacency, expand_similarity(sim, topo), U, segment);
}

}  // namespace dgs

// Copyright 2026 The KPA Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kpa/textrank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kpa/error.hpp"

namespace kpa::textrank {

void TextRankConfig::validate() const {
  if (!(damping > 0.0 && damping < 1.0)) throw UsageError("damping must lie in (0, 1)");
  if (!(tolerance > 0.0)) throw UsageError("tolerance must be positive");
  if (max_iterations < 1) throw UsageError("max_iterations must be >= 1");
}

SimilarityGraph SimilarityGraph::from_weights(Matrix w) {
  if (w.rows() != w.cols()) throw InputError("similarity graph needs a square matrix");
  const std::size_t n = w.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(w(i, j))) throw InputError("non-finite edge weight");
      if (std::abs(w(i, j) - w(j, i)) > 1e-9) throw InputError("similarity graph must be symmetric");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) w(i, j) = i == j ? 0.0 : std::clamp(w(i, j), 0.0, 1.0);
  }
  return SimilarityGraph(std::move(w));
}

SimilarityGraph SimilarityGraph::from_vectors(std::span<const embedding::Vector> vectors) {
  Matrix w = embedding::similarity_matrix(vectors, vectors);
  // Symmetrise exactly; cosine is symmetric up to rounding.
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = i + 1; j < w.cols(); ++j) w(j, i) = w(i, j);
  }
  return from_weights(std::move(w));
}

std::vector<double> textrank(const SimilarityGraph& graph, const TextRankConfig& config) {
  config.validate();
  const std::size_t n = graph.size();
  if (n == 0) throw InputError("textrank needs at least one node");
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> out_weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out_weight[i] += graph.weight(i, j);
  }

  std::vector<double> rank(n, inv_n);
  std::vector<double> next(n);
  double delta = 0.0;
  for (int it = 0; it < config.max_iterations; ++it) {
    double dangling = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (out_weight[j] == 0.0) dangling += rank[j];
    }
    const double base = (1.0 - config.damping) * inv_n + config.damping * dangling * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (out_weight[j] > 0.0) s += graph.weight(j, i) / out_weight[j] * rank[j];
      }
      next[i] = base + config.damping * s;
    }
    const double total = std::accumulate(next.begin(), next.end(), 0.0);
    delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= total;
      delta += std::abs(next[i] - rank[i]);
    }
    // The iterate that produced a sub-tolerance step is returned, so exact
    // fixed points such as the uniform vector come back unperturbed.
    if (delta < config.tolerance) return rank;
    rank.swap(next);
  }
  std::ostringstream msg;
  msg << "textrank did not converge after " << config.max_iterations
      << " iterations (last L1 delta " << delta << ")";
  throw StageError(msg.str());
}

std::vector<std::size_t> order_by_rank(std::span<const double> scores,
                                       std::span<const std::string> tie_keys) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Quantise so near-equal scores compare as ties under a strict weak order.
  const auto key = [&](std::size_t i) { return std::llround(scores[i] * 1e12); };
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = key(a);
    const auto kb = key(b);
    if (ka != kb) return ka > kb;
    return tie_keys[a] < tie_keys[b];
  });
  return idx;
}

std::vector<std::string> order_cluster(std::span<const std::string> members,
                                       const embedding::EmbeddingStore& store,
                                       const TextRankConfig& config) {
  if (members.empty()) throw StageError("cannot order an empty cluster");
  const std::vector<embedding::Vector> vectors = store.gather(members);
  const std::vector<double> scores = textrank(SimilarityGraph::from_vectors(vectors), config);
  std::vector<std::string> out;
  for (const std::size_t i : order_by_rank(scores, members)) out.push_back(members[i]);
  return out;
}

}  // namespace kpa::textrank

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

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kpa/embedding.hpp"
#include "kpa/matrix.hpp"

namespace kpa::textrank {

struct TextRankConfig {
  double damping = 0.85;
  double tolerance = 1e-6;  // on the L1 change between iterations
  int max_iterations = 100;

  void validate() const;
};

// Undirected similarity graph: symmetric, non-negative, zero diagonal.
class SimilarityGraph {
 public:
  // Negative weights are clamped to 0 and the diagonal is zeroed. Throws
  // InputError when the matrix is not square and symmetric.
  static SimilarityGraph from_weights(Matrix weights);
  // Edge weights are cosine similarities clamped at 0.
  static SimilarityGraph from_vectors(std::span<const embedding::Vector> vectors);

  std::size_t size() const noexcept { return weights_.rows(); }
  double weight(std::size_t i, std::size_t j) const { return weights_(i, j); }
  const Matrix& weights() const noexcept { return weights_; }

 private:
  explicit SimilarityGraph(Matrix w) : weights_(std::move(w)) {}
  Matrix weights_;
};

// Weighted PageRank by power iteration; dangling nodes spread their mass
// uniformly. The result sums to 1. Throws StageError on non-convergence.
std::vector<double> textrank(const SimilarityGraph& graph, const TextRankConfig& config = {});

// Members sorted by descending rank; ties (within 1e-12) by ascending id.
std::vector<std::string> order_cluster(std::span<const std::string> members,
                                       const embedding::EmbeddingStore& store,
                                       const TextRankConfig& config = {});

// Indices 0..n-1 sorted by descending score, ties by the given keys.
std::vector<std::size_t> order_by_rank(std::span<const double> scores,
                                       std::span<const std::string> tie_keys);

}  // namespace kpa::textrank

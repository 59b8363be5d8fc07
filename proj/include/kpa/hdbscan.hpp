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
#include <cstdint>
#include <vector>

#include "kpa/embedding.hpp"
#include "kpa/matrix.hpp"

namespace kpa::kpm {

// Building blocks of the density clusterer, exposed for testing.

struct MstEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

Matrix euclidean_distances(const std::vector<embedding::Vector>& points);

// Distance from each point to its `min_samples`-th nearest neighbour, the
// point itself counting as the first.
std::vector<double> core_distances(const Matrix& distances, std::size_t min_samples);

Matrix mutual_reachability(const Matrix& distances, const std::vector<double>& core);

// Prim's algorithm on a dense symmetric matrix; edges sorted by ascending
// weight, ties by (a, b).
std::vector<MstEdge> minimum_spanning_tree(const Matrix& weights);

struct CondensedEdge {
  std::size_t parent = 0;  // cluster label (>= n)
  std::size_t child = 0;   // point index (< n) or cluster label
  double lambda = 0.0;
  std::size_t size = 0;
};

// Condensed cluster tree. Cluster labels start at n (the root).
struct CondensedTree {
  std::size_t num_points = 0;
  std::vector<CondensedEdge> edges;
};

CondensedTree condense_tree(const std::vector<MstEdge>& mst, std::size_t num_points,
                            std::size_t min_cluster_size);

// Labels in [0, k) for clustered points, -1 for noise. Cluster labels are
// numbered by first appearance in point order.
std::vector<int> hdbscan_labels(const std::vector<embedding::Vector>& points,
                                std::size_t min_cluster_size, std::size_t min_samples);

std::vector<int> kmeans_labels(const std::vector<embedding::Vector>& points, std::size_t k,
                               std::uint64_t seed, int max_iterations = 100);

}  // namespace kpa::kpm

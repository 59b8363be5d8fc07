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
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kpa/corpus.hpp"
#include "kpa/embedding.hpp"

namespace kpa::kpm {

enum class Method { kHdbscan, kKmeans };

Method parse_method(std::string_view name);
std::string_view method_name(Method method);

struct KpmConfig {
  Method method = Method::kHdbscan;
  std::size_t min_cluster_size = 3;
  std::size_t k = 8;  // kmeans only
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Cluster {
  int id = 0;
  std::vector<std::string> members;
  bool operator==(const Cluster&) const = default;
};

// Hard cluster assignment of one partition. An id is either an outlier or
// a member of at least one cluster.
struct ClusterSet {
  std::vector<Cluster> clusters;  // ascending id
  std::vector<std::string> outliers;

  std::size_t count() const noexcept { return clusters.size(); }
  const Cluster* find(int id) const;
  int next_id() const;
  std::size_t total_members() const;
  void validate() const;

  bool operator==(const ClusterSet&) const = default;
};

// Deterministic given config.seed. HDBSCAN may leave outliers; kmeans never.
ClusterSet cluster(const embedding::EmbeddingStore& reduced, const corpus::Partition& partition,
                   const KpmConfig& config);

struct MembershipVector {
  std::string arg_id;
  std::map<int, double> probs;  // cluster id -> probability
};

// Softmax of negative Euclidean distances to cluster centroids, scaled by
// 1 / temperature, for every clustered argument.
std::vector<MembershipVector> membership(const embedding::EmbeddingStore& reduced,
                                         const ClusterSet& clusters, double temperature);

// Mean over arguments of the second-highest membership probability; 0 when
// there is a single cluster.
double compute_gamma(std::span<const MembershipVector> vectors);

using DiscretizedAssignment = std::map<std::string, std::set<int>>;

// Argmax cluster plus every other cluster whose probability reaches gamma
// (only when gamma > 0). Outliers map to the empty set.
DiscretizedAssignment discretize(std::span<const MembershipVector> vectors, double gamma,
                                 const ClusterSet& clusters);

}  // namespace kpa::kpm

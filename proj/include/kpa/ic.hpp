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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kpa/embedding.hpp"
#include "kpa/kpm.hpp"

namespace kpa::ic {

enum class AnchorMode { kCentroid, kMeanPairwise };

AnchorMode parse_anchor_mode(std::string_view name);
std::string_view anchor_mode_name(AnchorMode mode);

struct IcConfig {
  // Join threshold; values outside the kernel range are allowed and act as
  // "always found a new cluster" / "always join".
  double lambda = 0.9;
  AnchorMode anchor_mode = AnchorMode::kCentroid;
  embedding::Kernel kernel = embedding::Kernel::kCosine;

  void validate() const;
};

// A cluster's representative for similarity comparison.
class Anchor {
 public:
  static Anchor compute(int cluster_id, std::span<const std::string> members,
                        const embedding::EmbeddingStore& store, AnchorMode mode,
                        embedding::Kernel kernel = embedding::Kernel::kCosine);

  int cluster_id() const { return cluster_id_; }
  AnchorMode mode() const { return mode_; }
  // Centroid mode only.
  const embedding::Vector& vector() const;

  // Centroid mode: similarity to the centroid. Mean-pairwise mode: mean
  // similarity to every member.
  double score(const embedding::Vector& candidate) const;

 private:
  Anchor(int id, AnchorMode mode, embedding::Kernel kernel, std::vector<embedding::Vector> v)
      : cluster_id_(id), mode_(mode), kernel_(kernel), vectors_(std::move(v)) {}

  int cluster_id_;
  AnchorMode mode_;
  embedding::Kernel kernel_;
  std::vector<embedding::Vector> vectors_;  // centroid, or all members
};

// Assigns each unmatched argument to the most similar cluster anchor when
// the similarity exceeds lambda, otherwise founds a new singleton cluster.
// Arguments are taken greedily in order of decreasing best-anchor similarity
// against the anchors current at each step (ties by id), and anchors are
// refreshed after every change. Existing memberships are never removed.
kpm::ClusterSet iterative_assign(const kpm::ClusterSet& clusters,
                                 std::span<const std::string> unmatched,
                                 const embedding::EmbeddingStore& store, const IcConfig& config);

// Uses clusters.outliers as the unmatched list.
kpm::ClusterSet iterative_assign(const kpm::ClusterSet& clusters,
                                 const embedding::EmbeddingStore& store, const IcConfig& config);

}  // namespace kpa::ic

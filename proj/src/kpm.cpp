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

#include "kpa/kpm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kpa/error.hpp"
#include "kpa/hdbscan.hpp"

namespace kpa::kpm {

Method parse_method(std::string_view name) {
  if (name == "hdbscan") return Method::kHdbscan;
  if (name == "kmeans") return Method::kKmeans;
  throw UsageError("unknown clustering method '" + std::string(name) +
                   "' (expected hdbscan or kmeans)");
}

std::string_view method_name(Method method) {
  return method == Method::kHdbscan ? "hdbscan" : "kmeans";
}

void KpmConfig::validate() const {
  if (method == Method::kHdbscan && min_cluster_size < 2) {
    throw UsageError("min_cluster_size must be >= 2");
  }
  if (method == Method::kKmeans && k < 1) throw UsageError("k must be >= 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw UsageError("temperature must be a positive real");
  }
}

const Cluster* ClusterSet::find(int id) const {
  const auto it = std::lower_bound(clusters.begin(), clusters.end(), id,
                                   [](const Cluster& c, int v) { return c.id < v; });
  return it != clusters.end() && it->id == id ? &*it : nullptr;
}

int ClusterSet::next_id() const { return clusters.empty() ? 0 : clusters.back().id + 1; }

std::size_t ClusterSet::total_members() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.members.size();
  return n;
}

void ClusterSet::validate() const {
  std::set<std::string> clustered;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (clusters[i].members.empty()) {
      throw StageError("cluster " + std::to_string(clusters[i].id) + " is empty");
    }
    if (i > 0 && clusters[i - 1].id >= clusters[i].id) {
      throw StageError("cluster ids must be strictly ascending");
    }
    clustered.insert(clusters[i].members.begin(), clusters[i].members.end());
  }
  for (const auto& o : outliers) {
    if (clustered.contains(o)) throw StageError("argument '" + o + "' is both outlier and member");
  }
}

ClusterSet cluster(const embedding::EmbeddingStore& reduced, const corpus::Partition& partition,
                   const KpmConfig& config) {
  config.validate();
  const std::vector<embedding::Vector> points = reduced.gather(partition.arg_ids);
  const std::size_t n = points.size();

  std::vector<int> labels;
  if (config.method == Method::kHdbscan) {
    if (n < config.min_cluster_size) {
      throw InputError("partition (" + partition.topic_id + ", " +
                       std::string(corpus::stance_name(partition.stance)) + ") has " +
                       std::to_string(n) + " arguments, fewer than min_cluster_size " +
                       std::to_string(config.min_cluster_size));
    }
    labels = hdbscan_labels(points, config.min_cluster_size, config.min_cluster_size);
  } else {
    labels = kmeans_labels(points, config.k, config.seed);
  }

  ClusterSet out;
  int num_clusters = 0;
  for (const int l : labels) num_clusters = std::max(num_clusters, l + 1);
  out.clusters.resize(static_cast<std::size_t>(num_clusters));
  for (int c = 0; c < num_clusters; ++c) out.clusters[static_cast<std::size_t>(c)].id = c;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) {
      out.outliers.push_back(partition.arg_ids[i]);
    } else {
      out.clusters[static_cast<std::size_t>(labels[i])].members.push_back(partition.arg_ids[i]);
    }
  }
  return out;
}

std::vector<MembershipVector> membership(const embedding::EmbeddingStore& reduced,
                                         const ClusterSet& clusters, double temperature) {
  if (clusters.count() == 0) throw StageError("membership needs at least one cluster");
  if (!(temperature > 0.0)) throw UsageError("temperature must be positive");

  std::vector<embedding::Vector> centroids;
  for (const auto& c : clusters.clusters) {
    centroids.push_back(embedding::centroid(reduced.gather(c.members)));
  }

  // Every clustered argument once, in first-appearance order.
  std::vector<std::string> args;
  std::set<std::string> seen;
  for (const auto& c : clusters.clusters) {
    for (const auto& m : c.members) {
      if (seen.insert(m).second) args.push_back(m);
    }
  }

  std::vector<MembershipVector> out;
  out.reserve(args.size());
  std::vector<double> logits(centroids.size());
  for (const auto& id : args) {
    const embedding::Vector& x = reduced.at(id);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      double s = 0.0;
      for (std::size_t d = 0; d < x.dim(); ++d) {
        const double diff = x[d] - centroids[c][d];
        s += diff * diff;
      }
      logits[c] = -std::sqrt(s) / temperature;
      max_logit = std::max(max_logit, logits[c]);
    }
    double z = 0.0;
    for (double& l : logits) {
      l = std::exp(l - max_logit);
      z += l;
    }
    MembershipVector mv{id, {}};
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      mv.probs.emplace(clusters.clusters[c].id, logits[c] / z);
    }
    out.push_back(std::move(mv));
  }
  return out;
}

double compute_gamma(std::span<const MembershipVector> vectors) {
  if (vectors.empty()) throw StageError("gamma of an empty membership list");
  double sum = 0.0;
  for (const auto& v : vectors) {
    if (v.probs.size() < 2) continue;
    double first = -1.0;
    double second = -1.0;
    for (const auto& [id, p] : v.probs) {
      if (p > first) {
        second = first;
        first = p;
      } else if (p > second) {
        second = p;
      }
    }
    sum += second;
  }
  return sum / static_cast<double>(vectors.size());
}

DiscretizedAssignment discretize(std::span<const MembershipVector> vectors, double gamma,
                                 const ClusterSet& clusters) {
  DiscretizedAssignment out;
  for (const auto& o : clusters.outliers) out[o];
  for (const auto& v : vectors) {
    auto& assigned = out[v.arg_id];
    if (v.probs.empty()) continue;
    int argmax = v.probs.begin()->first;
    double best = v.probs.begin()->second;
    for (const auto& [id, p] : v.probs) {
      if (p > best) {
        best = p;
        argmax = id;
      }
    }
    assigned.insert(argmax);
    if (gamma > 0.0) {
      for (const auto& [id, p] : v.probs) {
        if (p >= gamma && clusters.find(id) != nullptr) assigned.insert(id);
      }
    }
  }
  return out;
}

}  // namespace kpa::kpm

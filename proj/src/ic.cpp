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

#include "kpa/ic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "kpa/error.hpp"

namespace kpa::ic {
namespace {

using embedding::Kernel;
using embedding::Vector;

double raw_dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Incrementally maintained anchor of one cluster during assignment.
struct AnchorState {
  int id = 0;
  std::size_t count = 0;
  std::vector<double> sum;  // centroid mode: sum of member vectors
  double sum_norm = 0.0;
};

}  // namespace

AnchorMode parse_anchor_mode(std::string_view name) {
  if (name == "centroid") return AnchorMode::kCentroid;
  if (name == "mean_pairwise") return AnchorMode::kMeanPairwise;
  throw UsageError("unknown anchor mode '" + std::string(name) +
                   "' (expected centroid or mean_pairwise)");
}

std::string_view anchor_mode_name(AnchorMode mode) {
  return mode == AnchorMode::kCentroid ? "centroid" : "mean_pairwise";
}

void IcConfig::validate() const {
  if (!std::isfinite(lambda)) throw UsageError("lambda must be finite");
}

Anchor Anchor::compute(int cluster_id, std::span<const std::string> members,
                       const embedding::EmbeddingStore& store, AnchorMode mode, Kernel kernel) {
  if (members.empty()) throw StageError("anchor of an empty cluster");
  std::vector<Vector> vectors = store.gather(members);
  if (mode == AnchorMode::kCentroid) {
    Vector c = embedding::centroid(vectors);
    if (kernel == Kernel::kCosine && embedding::norm(c) == 0.0) {
      throw StageError("cluster " + std::to_string(cluster_id) + " has a zero-norm centroid");
    }
    return Anchor(cluster_id, mode, kernel, {std::move(c)});
  }
  return Anchor(cluster_id, mode, kernel, std::move(vectors));
}

const Vector& Anchor::vector() const {
  if (mode_ != AnchorMode::kCentroid) throw StageError("mean-pairwise anchors have no vector");
  return vectors_.front();
}

double Anchor::score(const Vector& candidate) const {
  if (mode_ == AnchorMode::kCentroid) return embedding::similarity(candidate, vectors_.front(), kernel_);
  double s = 0.0;
  for (const Vector& m : vectors_) s += embedding::similarity(candidate, m, kernel_);
  return s / static_cast<double>(vectors_.size());
}

kpm::ClusterSet iterative_assign(const kpm::ClusterSet& clusters,
                                 std::span<const std::string> unmatched,
                                 const embedding::EmbeddingStore& store, const IcConfig& config) {
  config.validate();
  kpm::ClusterSet out = clusters;
  {
    std::set<std::string> clustered;
    for (const auto& c : clusters.clusters) clustered.insert(c.members.begin(), c.members.end());
    std::set<std::string> pending;
    for (const auto& id : unmatched) {
      if (clustered.contains(id)) {
        throw InputError("argument '" + id + "' is already clustered and cannot be re-assigned");
      }
      if (!pending.insert(id).second) throw InputError("argument '" + id + "' listed twice");
    }
    std::erase_if(out.outliers, [&](const std::string& o) { return pending.contains(o); });
  }

  const bool centroid_mode = config.anchor_mode == AnchorMode::kCentroid;
  const bool cosine = config.kernel == Kernel::kCosine;
  const std::size_t dim = store.dim();

  // Candidates, ordered by id so index order doubles as the id tie-break.
  std::vector<std::string> ids(unmatched.begin(), unmatched.end());
  std::sort(ids.begin(), ids.end());
  std::vector<const Vector*> xs;
  std::vector<double> x_norm;
  for (const auto& id : ids) {
    xs.push_back(&store.at(id));
    x_norm.push_back(embedding::norm(*xs.back()));
    if (cosine && x_norm.back() == 0.0) throw StageError("argument '" + id + "' has a zero-norm embedding");
  }
  const std::size_t l = ids.size();

  std::vector<AnchorState> anchors;
  // Mean-pairwise mode: acc[r][k] is the summed similarity of candidate r to
  // the members of cluster k; centroid mode stores the similarity itself.
  std::vector<std::vector<double>> table(l);

  const auto pair_similarity = [&](std::size_t r, const Vector& m) {
    const double d = raw_dot(xs[r]->values(), m.values());
    if (!cosine) return d;
    const double nm = embedding::norm(m);
    if (nm == 0.0) throw StageError("zero-norm member embedding");
    return std::clamp(d / (x_norm[r] * nm), -1.0, 1.0);
  };
  const auto centroid_similarity = [&](std::size_t r, const AnchorState& a) {
    const double d = raw_dot(xs[r]->values(), a.sum);
    if (!cosine) return d / static_cast<double>(a.count);
    if (a.sum_norm == 0.0) throw StageError("cluster " + std::to_string(a.id) + " has a zero-norm centroid");
    return std::clamp(d / (x_norm[r] * a.sum_norm), -1.0, 1.0);
  };
  const auto score = [&](std::size_t r, std::size_t k) {
    return centroid_mode ? table[r][k] : table[r][k] / static_cast<double>(anchors[k].count);
  };

  const auto add_member = [&](AnchorState& a, const Vector& v) {
    ++a.count;
    if (centroid_mode) {
      if (a.sum.empty()) a.sum.assign(dim, 0.0);
      for (std::size_t d = 0; d < dim; ++d) a.sum[d] += v[d];
      a.sum_norm = std::sqrt(raw_dot(a.sum, a.sum));
    }
  };

  for (const auto& c : out.clusters) {
    AnchorState a;
    a.id = c.id;
    for (const auto& m : c.members) add_member(a, store.at(m));
    anchors.push_back(std::move(a));
  }

  std::vector<bool> done(l, false);
  std::vector<double> best(l, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> best_k(l, 0);

  const auto rescan = [&](std::size_t r) {
    best[r] = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      const double s = score(r, k);
      if (s > best[r]) {
        best[r] = s;
        best_k[r] = k;
      }
    }
  };

  for (std::size_t r = 0; r < l; ++r) {
    table[r].resize(anchors.size());
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      if (centroid_mode) {
        table[r][k] = centroid_similarity(r, anchors[k]);
      } else {
        double s = 0.0;
        for (const auto& m : out.clusters[k].members) s += pair_similarity(r, store.at(m));
        table[r][k] = s;
      }
    }
    rescan(r);
  }

  // Refreshes column k after cluster k gained `joined` (the new member).
  const auto refresh = [&](std::size_t k, std::size_t joined) {
    for (std::size_t r = 0; r < l; ++r) {
      if (done[r]) continue;
      if (table[r].size() <= k) table[r].resize(k + 1, 0.0);
      if (centroid_mode) {
        table[r][k] = centroid_similarity(r, anchors[k]);
      } else {
        table[r][k] += pair_similarity(r, *xs[joined]);
      }
      const double s = score(r, k);
      if (best_k[r] == k && s < best[r]) {
        rescan(r);
      } else if (s > best[r] || (s == best[r] && k < best_k[r])) {
        best[r] = s;
        best_k[r] = k;
      }
    }
  };

  for (std::size_t step = 0; step < l; ++step) {
    std::size_t pick = l;
    for (std::size_t r = 0; r < l; ++r) {
      if (done[r]) continue;
      if (pick == l || best[r] > best[pick]) pick = r;
    }
    done[pick] = true;

    std::size_t k = 0;
    if (!anchors.empty() && best[pick] > config.lambda) {
      k = best_k[pick];
      out.clusters[k].members.push_back(ids[pick]);
    } else {
      k = anchors.size();
      AnchorState a;
      a.id = out.next_id();
      anchors.push_back(std::move(a));
      out.clusters.push_back({anchors.back().id, {ids[pick]}});
    }
    add_member(anchors[k], *xs[pick]);
    refresh(k, pick);
  }
  return out;
}

kpm::ClusterSet iterative_assign(const kpm::ClusterSet& clusters,
                                 const embedding::EmbeddingStore& store, const IcConfig& config) {
  const std::vector<std::string> unmatched = clusters.outliers;
  return iterative_assign(clusters, unmatched, store, config);
}

}  // namespace kpa::ic

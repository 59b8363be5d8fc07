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

#include "kpa/hdbscan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "kpa/error.hpp"
#include "kpa/rng.hpp"

namespace kpa::kpm {
namespace {

struct LinkageNode {
  std::size_t left = 0;
  std::size_t right = 0;
  double distance = 0.0;
  std::size_t size = 0;
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void link(std::size_t child, std::size_t root) { parent_[child] = root; }

 private:
  std::vector<std::size_t> parent_;
};

// Single-linkage dendrogram; node i >= n is linkage[i - n].
std::vector<LinkageNode> single_linkage(const std::vector<MstEdge>& mst, std::size_t n) {
  std::vector<LinkageNode> linkage;
  linkage.reserve(mst.size());
  UnionFind uf(2 * n);
  std::vector<std::size_t> size(2 * n, 1);
  std::size_t next = n;
  for (const MstEdge& e : mst) {
    const std::size_t ra = uf.find(e.a);
    const std::size_t rb = uf.find(e.b);
    linkage.push_back({ra, rb, e.weight, size[ra] + size[rb]});
    size[next] = size[ra] + size[rb];
    uf.link(ra, next);
    uf.link(rb, next);
    ++next;
  }
  return linkage;
}

double squared_distance(const embedding::Vector& a, const embedding::Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<int> renumber_by_first_appearance(const std::vector<int>& raw) {
  std::map<int, int> remap;
  std::vector<int> out(raw.size(), -1);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < 0) continue;
    const auto [it, inserted] = remap.emplace(raw[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

}  // namespace

Matrix euclidean_distances(const std::vector<embedding::Vector>& points) {
  const std::size_t n = points.size();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = std::sqrt(squared_distance(points[i], points[j]));
    }
  }
  return d;
}

std::vector<double> core_distances(const Matrix& distances, std::size_t min_samples) {
  const std::size_t n = distances.rows();
  std::vector<double> core(n, 0.0);
  if (n == 0) return core;
  const std::size_t k = std::min(std::max<std::size_t>(min_samples, 1), n) - 1;
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.assign(distances.row(i).begin(), distances.row(i).end());
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
    core[i] = row[k];
  }
  return core;
}

Matrix mutual_reachability(const Matrix& distances, const std::vector<double>& core) {
  const std::size_t n = distances.rows();
  Matrix mr(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      mr(i, j) = i == j ? 0.0 : std::max({core[i], core[j], distances(i, j)});
    }
  }
  return mr;
}

std::vector<MstEdge> minimum_spanning_tree(const Matrix& weights) {
  const std::size_t n = weights.rows();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t next = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      if (weights(current, v) < best[v]) {
        best[v] = weights(current, v);
        from[v] = current;
      }
      if (next == n || best[v] < best[next]) next = v;
    }
    in_tree[next] = true;
    edges.push_back({std::min(from[next], next), std::max(from[next], next), best[next]});
    current = next;
  }
  std::sort(edges.begin(), edges.end(), [](const MstEdge& x, const MstEdge& y) {
    if (x.weight != y.weight) return x.weight < y.weight;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  return edges;
}

CondensedTree condense_tree(const std::vector<MstEdge>& mst, std::size_t n,
                            std::size_t min_cluster_size) {
  CondensedTree tree;
  tree.num_points = n;
  if (n < 2) return tree;

  double min_positive = std::numeric_limits<double>::infinity();
  for (const auto& e : mst) {
    if (e.weight > 0.0) min_positive = std::min(min_positive, e.weight);
  }
  // Zero distances (duplicate points) get the densest finite level seen in
  // the data rather than an infinite lambda.
  const double lambda_cap = std::isfinite(min_positive) ? 1.0 / min_positive : 1.0;
  const auto to_lambda = [&](double d) { return d > 0.0 ? 1.0 / d : lambda_cap; };

  const std::vector<LinkageNode> linkage = single_linkage(mst, n);
  const auto node_size = [&](std::size_t node) {
    return node < n ? std::size_t{1} : linkage[node - n].size;
  };
  const auto subtree = [&](std::size_t node) {
    std::vector<std::size_t> out{node};
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i] >= n) {
        out.push_back(linkage[out[i] - n].left);
        out.push_back(linkage[out[i] - n].right);
      }
    }
    return out;
  };

  const std::size_t root = 2 * n - 2;
  std::vector<std::size_t> relabel(2 * n - 1, 0);
  std::vector<bool> ignore(2 * n - 1, false);
  relabel[root] = n;
  std::size_t next_label = n + 1;

  for (const std::size_t node : subtree(root)) {
    if (node < n || ignore[node]) continue;
    const LinkageNode& ln = linkage[node - n];
    const double lambda = to_lambda(ln.distance);
    const std::size_t lc = node_size(ln.left);
    const std::size_t rc = node_size(ln.right);
    const std::size_t parent = relabel[node];

    const auto fall_out = [&](std::size_t side) {
      for (const std::size_t sub : subtree(side)) {
        if (sub < n) tree.edges.push_back({parent, sub, lambda, 1});
        ignore[sub] = true;
      }
    };

    if (lc >= min_cluster_size && rc >= min_cluster_size) {
      relabel[ln.left] = next_label++;
      tree.edges.push_back({parent, relabel[ln.left], lambda, lc});
      relabel[ln.right] = next_label++;
      tree.edges.push_back({parent, relabel[ln.right], lambda, rc});
    } else if (lc < min_cluster_size && rc < min_cluster_size) {
      fall_out(ln.left);
      fall_out(ln.right);
    } else if (lc < min_cluster_size) {
      relabel[ln.right] = parent;
      fall_out(ln.left);
    } else {
      relabel[ln.left] = parent;
      fall_out(ln.right);
    }
  }
  return tree;
}

std::vector<int> hdbscan_labels(const std::vector<embedding::Vector>& points,
                                std::size_t min_cluster_size, std::size_t min_samples) {
  const std::size_t n = points.size();
  if (n == 0) return {};
  if (n < min_cluster_size) return std::vector<int>(n, -1);

  const Matrix dist = euclidean_distances(points);
  const Matrix mr = mutual_reachability(dist, core_distances(dist, min_samples));
  const std::vector<MstEdge> mst = minimum_spanning_tree(mr);
  const bool degenerate =
      std::all_of(mst.begin(), mst.end(), [](const MstEdge& e) { return e.weight == 0.0; });
  if (degenerate) return std::vector<int>(n, 0);

  const CondensedTree tree = condense_tree(mst, n, min_cluster_size);
  std::size_t num_clusters = 1;
  for (const auto& e : tree.edges) {
    if (e.child >= n) num_clusters = std::max(num_clusters, e.child - n + 1);
  }

  // Birth level, stability and parent of every cluster (index = label - n).
  std::vector<double> birth(num_clusters, 0.0);
  std::vector<std::size_t> parent_of(num_clusters, 0);
  std::vector<std::vector<std::size_t>> children(num_clusters);
  for (const auto& e : tree.edges) {
    if (e.child >= n) {
      birth[e.child - n] = e.lambda;
      parent_of[e.child - n] = e.parent - n;
      children[e.parent - n].push_back(e.child - n);
    }
  }
  std::vector<double> stability(num_clusters, 0.0);
  for (const auto& e : tree.edges) {
    stability[e.parent - n] += (e.lambda - birth[e.parent - n]) * static_cast<double>(e.size);
  }

  // Excess-of-mass selection, children before parents. The root competes
  // like any other cluster.
  std::vector<bool> selected(num_clusters, true);
  for (std::size_t c = num_clusters; c-- > 0;) {
    double subtree_stability = 0.0;
    for (const std::size_t ch : children[c]) subtree_stability += stability[ch];
    if (!children[c].empty() && subtree_stability > stability[c]) {
      selected[c] = false;
      stability[c] = subtree_stability;
    } else {
      std::vector<std::size_t> stack(children[c].begin(), children[c].end());
      while (!stack.empty()) {
        const std::size_t d = stack.back();
        stack.pop_back();
        selected[d] = false;
        stack.insert(stack.end(), children[d].begin(), children[d].end());
      }
    }
  }

  // Cluster each point fell out of.
  std::vector<std::size_t> point_parent(n, 0);
  std::vector<double> point_lambda(n, 0.0);
  for (const auto& e : tree.edges) {
    if (e.child < n) {
      point_parent[e.child] = e.parent - n;
      point_lambda[e.child] = e.lambda;
    }
  }

  std::vector<int> raw(n, -1);
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t c = point_parent[p];
    while (true) {
      if (selected[c]) {
        raw[p] = static_cast<int>(c);
        break;
      }
      if (c == 0) break;
      c = parent_of[c];
    }
  }

  if (selected[0]) {
    // The root as the single cluster is born at the level that maximises
    // the mean excess of mass of the points that remain, which trims points
    // that split off far from the bulk of the data.
    double min_child_birth = std::numeric_limits<double>::infinity();
    for (const std::size_t ch : children[0]) min_child_birth = std::min(min_child_birth, birth[ch]);
    std::vector<double> exit(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t c = point_parent[p];
      if (c == 0) {
        exit[p] = point_lambda[p];
        continue;
      }
      while (parent_of[c] != 0) c = parent_of[c];
      exit[p] = birth[c];
    }
    std::vector<double> levels{0.0};
    for (std::size_t p = 0; p < n; ++p) {
      if (point_parent[p] == 0 && point_lambda[p] < min_child_birth) levels.push_back(point_lambda[p]);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    double best_score = -std::numeric_limits<double>::infinity();
    double best_level = 0.0;
    for (const double b : levels) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t p = 0; p < n; ++p) {
        if (exit[p] > b) {
          sum += exit[p] - b;
          ++count;
        }
      }
      if (count < min_cluster_size) continue;
      const double score = sum / static_cast<double>(count);
      if (score > best_score) {
        best_score = score;
        best_level = b;
      }
    }
    for (std::size_t p = 0; p < n; ++p) {
      if (raw[p] == 0 && exit[p] <= best_level) raw[p] = -1;
    }
  }
  return renumber_by_first_appearance(raw);
}

std::vector<int> kmeans_labels(const std::vector<embedding::Vector>& points, std::size_t k,
                               std::uint64_t seed, int max_iterations) {
  const std::size_t n = points.size();
  if (k == 0) throw InputError("kmeans needs k >= 1");
  if (k > n) {
    throw InputError("kmeans k=" + std::to_string(k) + " exceeds partition size " +
                     std::to_string(n));
  }
  const std::size_t dim = points.front().dim();

  // Seeded farthest-point initialisation.
  Rng rng(seed);
  std::vector<std::size_t> init{rng.index(n)};
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (init.size() < k) {
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], points[init.back()]));
    }
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (nearest[i] > nearest[far]) far = i;
    }
    init.push_back(far);
  }
  std::vector<std::vector<double>> centers;
  for (const std::size_t i : init) centers.emplace_back(points[i].values().begin(), points[i].values().end());

  const auto dist_to = [&](std::size_t i, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double x = points[i][d] - c[d];
      s += x * x;
    }
    return s;
  };

  std::vector<int> labels(n, -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = dist_to(i, centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = dist_to(i, centers[c]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    // Refill empty clusters with the point farthest from its own center.
    std::vector<std::size_t> sizes(k, 0);
    for (const int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto l = static_cast<std::size_t>(labels[i]);
        if (sizes[l] < 2) continue;
        const double d = dist_to(i, centers[l]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --sizes[static_cast<std::size_t>(labels[far])];
      labels[far] = static_cast<int>(c);
      sizes[c] = 1;
      changed = true;
    }
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> sum(dim, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != static_cast<int>(c)) continue;
        for (std::size_t d = 0; d < dim; ++d) sum[d] += points[i][d];
      }
      for (double& s : sum) s /= static_cast<double>(sizes[c]);
      centers[c] = std::move(sum);
    }
    if (!changed) break;
  }
  return renumber_by_first_appearance(labels);
}

}  // namespace kpa::kpm

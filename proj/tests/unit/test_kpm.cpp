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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "kpa/error.hpp"
#include "kpa/hdbscan.hpp"
#include "kpa/kpm.hpp"
#include "kpa/rng.hpp"
#include "oracles.hpp"

using namespace kpa;
using embedding::Vector;

namespace {

struct Fixture {
  embedding::EmbeddingStore store;
  corpus::Partition partition;
  std::vector<int> truth;  // ground-truth group per partition position
};

void add_point(Fixture& f, std::vector<double> x, int group) {
  const std::string id = "x" + std::to_string(100 + f.partition.arg_ids.size());
  f.store.insert(id, Vector(std::move(x)));
  f.partition.arg_ids.push_back(id);
  f.truth.push_back(group);
}

// Blobs of `size` points, per-coordinate spread `spread`, centres `gap` apart.
Fixture blobs(std::uint64_t seed, std::vector<std::size_t> sizes, double spread, double gap,
              std::size_t dim = 5) {
  Rng rng(seed);
  Fixture f;
  f.partition.topic_id = "T";
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    std::vector<double> centre(dim, 0.0);
    centre[g % dim] = gap * static_cast<double>(g);
    for (std::size_t i = 0; i < sizes[g]; ++i) {
      std::vector<double> x = centre;
      for (auto& e : x) e += rng.uniform(-spread, spread);
      add_point(f, x, static_cast<int>(g));
    }
  }
  return f;
}

std::vector<int> labels_of(const kpm::ClusterSet& cs, const corpus::Partition& p) {
  std::map<std::string, int> label;
  for (const auto& id : cs.outliers) label[id] = -1;
  for (const auto& c : cs.clusters) {
    for (const auto& id : c.members) label[id] = c.id;
  }
  std::vector<int> out;
  for (const auto& id : p.arg_ids) out.push_back(label.at(id));
  return out;
}

kpm::MembershipVector mv(const std::string& id, std::map<int, double> probs) {
  return {id, std::move(probs)};
}

kpm::ClusterSet two_clusters() {
  kpm::ClusterSet cs;
  cs.clusters = {{0, {"a"}}, {1, {"b"}}};
  return cs;
}

}  // namespace

TEST_CASE("core distances count the point itself") {
  const std::vector<Vector> pts{Vector({0.0}), Vector({1.0}), Vector({3.0}), Vector({7.0})};
  const Matrix d = kpm::euclidean_distances(pts);
  CHECK(d(0, 2) == 3.0);
  const auto core = kpm::core_distances(d, 2);
  CHECK(core == std::vector<double>{1.0, 1.0, 2.0, 4.0});
  const auto core1 = kpm::core_distances(d, 1);
  CHECK(core1 == std::vector<double>{0, 0, 0, 0});
}

TEST_CASE("mutual reachability and spanning tree match brute force") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vector> pts;
    for (int i = 0; i < 12; ++i) pts.push_back(Vector({rng.uniform(0, 5), rng.uniform(0, 5)}));
    const Matrix d = kpm::euclidean_distances(pts);
    const auto core = kpm::core_distances(d, 3);
    const Matrix mr = kpm::mutual_reachability(d, core);
    for (std::size_t i = 0; i < 12; ++i) {
      std::vector<double> row(d.row(i).begin(), d.row(i).end());
      std::sort(row.begin(), row.end());
      CHECK(core[i] == row[2]);
      for (std::size_t j = 0; j < 12; ++j) {
        if (i != j) CHECK(mr(i, j) == std::max({core[i], core[j], d(i, j)}));
      }
    }
    // Kruskal with a naive component array as the reference weight.
    std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < 12; ++i) {
      for (std::size_t j = i + 1; j < 12; ++j) edges.emplace_back(mr(i, j), i, j);
    }
    std::sort(edges.begin(), edges.end());
    std::vector<std::size_t> comp(12);
    for (std::size_t i = 0; i < 12; ++i) comp[i] = i;
    double kruskal = 0;
    for (const auto& [w, a, b] : edges) {
      if (comp[a] == comp[b]) continue;
      kruskal += w;
      const std::size_t old = comp[b];
      for (auto& c : comp) {
        if (c == old) c = comp[a];
      }
    }
    const auto mst = kpm::minimum_spanning_tree(mr);
    REQUIRE(mst.size() == 11);
    double prim = 0;
    for (const auto& e : mst) prim += e.weight;
    CHECK(prim == doctest::Approx(kruskal).epsilon(1e-12));
    for (std::size_t k = 1; k < mst.size(); ++k) CHECK(mst[k - 1].weight <= mst[k].weight);
  }
}

TEST_CASE("two separated blobs give two clusters under every seed") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Fixture f = blobs(seed, {5, 5}, 0.1, 10.0);
    kpm::KpmConfig cfg;
    cfg.seed = seed;
    const auto cs = kpm::cluster(f.store, f.partition, cfg);
    CHECK(cs.count() == 2);
    CHECK(cs.outliers.empty());
    CHECK(oracle::adjusted_rand_index(labels_of(cs, f.partition), f.truth) == 1.0);
  }
}

TEST_CASE("identical points form one cluster") {
  Fixture f;
  for (int i = 0; i < 6; ++i) add_point(f, {1.0, 2.0, 3.0}, 0);
  const auto cs = kpm::cluster(f.store, f.partition, {});
  CHECK(cs.count() == 1);
  CHECK(cs.outliers.empty());
  CHECK(cs.clusters[0].members.size() == 6);
}

TEST_CASE("a far isolated point is the only outlier") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Fixture f = blobs(seed, {6}, 0.1, 10.0);
    add_point(f, {50.0, 50.0, 50.0, 50.0, 50.0}, 1);
    // Brute-force check of the premise: every mutual-reachability distance
    // from the isolated point exceeds every one inside the blob.
    const std::vector<Vector> pts = f.store.gather(f.partition.arg_ids);
    const Matrix d = kpm::euclidean_distances(pts);
    std::vector<double> core(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::vector<double> row(d.row(i).begin(), d.row(i).end());
      std::sort(row.begin(), row.end());
      core[i] = row[2];
    }
    double inner = 0, outer = INFINITY;
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        if (i != j) inner = std::max(inner, std::max({core[i], core[j], d(i, j)}));
      }
      outer = std::min(outer, std::max({core[i], core[6], d(i, 6)}));
    }
    REQUIRE(outer > inner);

    const auto cs = kpm::cluster(f.store, f.partition, {});
    CHECK(cs.count() == 1);
    CHECK(cs.outliers == std::vector<std::string>{f.partition.arg_ids.back()});
  }
}

TEST_CASE("three blobs with strays") {
  Fixture f = blobs(9, {8, 8, 8}, 0.2, 6.0);
  add_point(f, {30, -30, 30, -30, 30}, 3);
  add_point(f, {-30, 30, -30, 30, -30}, 4);
  const auto cs = kpm::cluster(f.store, f.partition, {});
  cs.validate();
  CHECK(cs.count() == 3);
  CHECK(cs.outliers.size() == 2);
}

TEST_CASE("hdbscan is deterministic and labels are a partition") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vector> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(Vector({rng.normal(), rng.normal(), rng.normal()}));
    const auto a = kpm::hdbscan_labels(pts, 4, 4);
    CHECK(a == kpm::hdbscan_labels(pts, 4, 4));
    std::map<int, int> sizes;
    for (const int l : a) {
      CHECK(l >= -1);
      if (l >= 0) ++sizes[l];
    }
    for (const auto& [l, n] : sizes) CHECK(n >= 4);
    // Labels are numbered by first appearance.
    int next = 0;
    for (const int l : a) {
      if (l == next) ++next;
      CHECK(l < next);
    }
  }
}

TEST_CASE("cluster preconditions") {
  Fixture f = blobs(1, {2}, 0.1, 1.0);
  CHECK_THROWS_AS(kpm::cluster(f.store, f.partition, {}), InputError);
  kpm::KpmConfig bad;
  bad.min_cluster_size = 1;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = {};
  bad.temperature = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  CHECK_THROWS_AS(kpm::parse_method("dbscan"), UsageError);
}

TEST_CASE("kmeans gives exactly k clusters and no outliers") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Fixture f = blobs(seed, {7, 6, 9}, 0.5, 3.0);
    for (std::size_t k = 1; k <= 6; ++k) {
      kpm::KpmConfig cfg;
      cfg.method = kpm::Method::kKmeans;
      cfg.k = k;
      cfg.seed = seed;
      const auto cs = kpm::cluster(f.store, f.partition, cfg);
      CHECK(cs.count() == k);
      CHECK(cs.outliers.empty());
      CHECK(cs.total_members() == f.partition.arg_ids.size());
      CHECK(kpm::cluster(f.store, f.partition, cfg) == cs);
    }
    kpm::KpmConfig cfg;
    cfg.method = kpm::Method::kKmeans;
    cfg.k = 3;
    const auto cs = kpm::cluster(f.store, f.partition, cfg);
    CHECK(oracle::adjusted_rand_index(labels_of(cs, f.partition), f.truth) == 1.0);
  }
  const Fixture small = blobs(0, {3}, 0.5, 3.0);
  kpm::KpmConfig cfg;
  cfg.method = kpm::Method::kKmeans;
  cfg.k = 4;
  CHECK_THROWS_AS(kpm::cluster(small.store, small.partition, cfg), InputError);
}

TEST_CASE("membership examples") {
  embedding::EmbeddingStore s;
  s.insert("a", Vector({0.0, 0.0}));
  s.insert("b", Vector({100.0, 0.0}));
  s.insert("m", Vector({50.0, 0.0}));
  SUBCASE("point at its own centroid") {
    const auto v = kpm::membership(s, two_clusters(), 1.0);
    const auto& pa = std::find_if(v.begin(), v.end(), [](const auto& x) { return x.arg_id == "a"; })->probs;
    CHECK(std::abs(pa.at(0) - 1.0) <= 1e-9);
  }
  SUBCASE("equidistant point") {
    // Centroids (-0.5, 0) and (0.5, 0); "m" belongs to both and sits midway.
    embedding::EmbeddingStore z;
    z.insert("a", Vector({-1.0, 0.0}));
    z.insert("b", Vector({1.0, 0.0}));
    z.insert("m", Vector({0.0, 0.0}));
    kpm::ClusterSet two;
    two.clusters = {{0, {"a", "m"}}, {1, {"b", "m"}}};
    const auto probs = kpm::membership(z, two, 1.0);
    const auto& pm = std::find_if(probs.begin(), probs.end(), [](const auto& x) { return x.arg_id == "m"; })->probs;
    CHECK(pm.at(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pm.at(1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("single cluster") {
    kpm::ClusterSet one;
    one.clusters = {{0, {"a", "b", "m"}}};
    for (const auto& v : kpm::membership(s, one, 0.3)) CHECK(v.probs.at(0) == 1.0);
  }
}

TEST_CASE("membership matches the softmax definition") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    embedding::EmbeddingStore s;
    kpm::ClusterSet cs;
    const int k = 2 + static_cast<int>(rng.index(4));
    for (int c = 0; c < k; ++c) cs.clusters.push_back({c, {}});
    for (int i = 0; i < 15; ++i) {
      const std::string id = "p" + std::to_string(i);
      s.insert(id, Vector({rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)}));
      cs.clusters[static_cast<std::size_t>(i % k)].members.push_back(id);
    }
    const double tau = rng.uniform(0.2, 3.0);
    std::vector<std::vector<double>> centroids;
    for (const auto& c : cs.clusters) {
      std::vector<double> m(3, 0.0);
      for (const auto& id : c.members) {
        for (int d = 0; d < 3; ++d) m[d] += s.at(id)[d] / static_cast<double>(c.members.size());
      }
      centroids.push_back(m);
    }
    for (const auto& v : kpm::membership(s, cs, tau)) {
      std::vector<double> w;
      for (const auto& m : centroids) {
        double d = 0;
        for (int j = 0; j < 3; ++j) d += (s.at(v.arg_id)[j] - m[j]) * (s.at(v.arg_id)[j] - m[j]);
        w.push_back(std::exp(-std::sqrt(d) / tau));
      }
      double z = 0;
      for (const double x : w) z += x;
      double total = 0;
      for (int c = 0; c < k; ++c) {
        CHECK(v.probs.at(c) == doctest::Approx(w[c] / z).epsilon(1e-12));
        total += v.probs.at(c);
      }
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("gamma examples") {
  const std::vector<kpm::MembershipVector> a{mv("x", {{0, 0.8}, {1, 0.2}}), mv("y", {{0, 0.6}, {1, 0.4}})};
  CHECK(kpm::compute_gamma(a) == doctest::Approx(0.3).epsilon(1e-15));
  const std::vector<kpm::MembershipVector> single{mv("x", {{0, 1.0}}), mv("y", {{0, 1.0}})};
  CHECK(kpm::compute_gamma(single) == 0.0);
  const std::vector<kpm::MembershipVector> half{mv("x", {{0, 0.5}, {1, 0.5}}), mv("y", {{0, 0.5}, {1, 0.5}})};
  CHECK(kpm::compute_gamma(half) == 0.5);
  CHECK_THROWS(kpm::compute_gamma(std::vector<kpm::MembershipVector>{}));
}

TEST_CASE("gamma matches direct arithmetic and lies between the extremes") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.index(5));
    const int n = 1 + static_cast<int>(rng.index(20));
    std::vector<kpm::MembershipVector> vs;
    double sum = 0, lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i < n; ++i) {
      std::vector<double> w(static_cast<std::size_t>(k));
      double z = 0;
      for (auto& x : w) z += (x = rng.uniform());
      kpm::MembershipVector v{"p" + std::to_string(i), {}};
      for (int c = 0; c < k; ++c) v.probs[c] = w[static_cast<std::size_t>(c)] / z;
      std::vector<double> sorted;
      for (const auto& [c, p] : v.probs) sorted.push_back(p);
      std::sort(sorted.rbegin(), sorted.rend());
      sum += sorted[1];
      lo = std::min(lo, sorted[1]);
      hi = std::max(hi, sorted[1]);
      vs.push_back(v);
    }
    const double g = kpm::compute_gamma(vs);
    CHECK(std::abs(g - sum / n) <= 1e-12);
    CHECK(g >= lo - 1e-15);
    CHECK(g <= hi + 1e-15);
  }
}

TEST_CASE("discretize examples") {
  const auto cs = two_clusters();
  const std::vector<kpm::MembershipVector> v{mv("a", {{0, 0.7}, {1, 0.3}})};
  CHECK(kpm::discretize(v, 0.25, cs).at("a") == std::set<int>{0, 1});
  CHECK(kpm::discretize(v, 0.35, cs).at("a") == std::set<int>{0});
  CHECK(kpm::discretize(v, 0.0, cs).at("a") == std::set<int>{0});
  kpm::ClusterSet with_outlier = cs;
  with_outlier.outliers = {"z"};
  CHECK(kpm::discretize(v, 0.25, with_outlier).at("z").empty());
}

TEST_CASE("discretized assignments cover every member and respect gamma") {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    embedding::EmbeddingStore s;
    kpm::ClusterSet cs;
    const int k = 1 + static_cast<int>(rng.index(4));
    for (int c = 0; c < k; ++c) cs.clusters.push_back({c, {}});
    for (int i = 0; i < 12; ++i) {
      const std::string id = "p" + std::to_string(i);
      s.insert(id, Vector({rng.uniform(-2, 2), rng.uniform(-2, 2)}));
      cs.clusters[static_cast<std::size_t>(i % k)].members.push_back(id);
    }
    cs.outliers = {"q"};
    const auto vs = kpm::membership(s, cs, 1.0);
    const double g = kpm::compute_gamma(vs);
    const auto d = kpm::discretize(vs, g, cs);
    CHECK(d.at("q").empty());
    for (const auto& v : vs) {
      const auto& set = d.at(v.arg_id);
      REQUIRE_FALSE(set.empty());
      const int argmax = std::max_element(v.probs.begin(), v.probs.end(), [](const auto& a, const auto& b) {
                           return a.second < b.second;
                         })->first;
      for (const int c : set) {
        CHECK(cs.find(c) != nullptr);
        if (c != argmax) CHECK(v.probs.at(c) >= g);
      }
    }
  }
}

TEST_CASE("cluster set validation") {
  kpm::ClusterSet cs;
  cs.clusters = {{0, {"a"}}, {2, {"b"}}};
  cs.validate();
  CHECK(cs.next_id() == 3);
  CHECK(cs.find(2)->members[0] == "b");
  CHECK(cs.find(1) == nullptr);
  cs.outliers = {"a"};
  CHECK_THROWS_AS(cs.validate(), StageError);
  cs.outliers.clear();
  cs.clusters.push_back({1, {"c"}});
  CHECK_THROWS_AS(cs.validate(), StageError);
}

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
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "kpa/error.hpp"
#include "kpa/kpg.hpp"
#include "kpa/rng.hpp"
#include "stub_server.hpp"

using namespace kpa;
using corpus::Stance;
using embedding::Vector;
using kpg::GeneratedKeyPoint;

namespace {

GeneratedKeyPoint kp(int id, std::size_t size, double centrality = 0.0) {
  GeneratedKeyPoint k;
  k.id = id;
  k.text = "kp" + std::to_string(id);
  k.source_cluster_ids = {id};
  k.effective_size = size;
  k.centrality = centrality;
  return k;
}

// Unit vectors in the plane at the given angles (radians).
std::vector<Vector> at_angles(const std::vector<double>& angles) {
  std::vector<Vector> out;
  for (const double a : angles) out.push_back(Vector({std::cos(a), std::sin(a)}));
  return out;
}

kpg::ClusterInput cluster_input(const std::vector<std::string>& texts, std::vector<Vector> vectors) {
  return {kpg::assemble_prompt(Stance::kPro, "T", texts, 2000), texts, std::move(vectors)};
}

}  // namespace

TEST_CASE("prompt rendering") {
  const std::vector<std::string> args{"a1", "a2"};
  const auto p = kpg::assemble_prompt(Stance::kPro, "T", args, 2000);
  CHECK(p.rendered == "Positive T a1 a2");
  CHECK(kpg::assemble_prompt(Stance::kCon, "T", args, 2000).rendered == "Negative T a1 a2");
  const std::vector<std::string> uniform_args{"They restrict freedom."};
  CHECK(kpg::assemble_prompt(Stance::kPro, "We should abandon the use of school uniforms", uniform_args, 2000)
            .rendered.rfind("Positive We should abandon the use of school uniforms", 0) == 0);
}

TEST_CASE("prompt budget") {
  const std::vector<std::string> args{"aaaa", "bbbb", "cccc"};
  // "Positive T" is 10 characters; each argument adds 5.
  SUBCASE("drop from the tail") {
    const auto p = kpg::assemble_prompt(Stance::kPro, "T", args, 22);
    CHECK(p.rendered == "Positive T aaaa bbbb");
    CHECK(p.arguments == std::vector<std::string>{"aaaa", "bbbb"});
    CHECK(p.rendered.size() <= 22);
  }
  SUBCASE("exact fit keeps everything") {
    CHECK(kpg::assemble_prompt(Stance::kPro, "T", args, 25).arguments.size() == 3);
  }
  SUBCASE("first argument does not fit") {
    try {
      kpg::assemble_prompt(Stance::kPro, "T", args, 12);
      FAIL("expected an error");
    } catch (const StageError& e) {
      CHECK(std::string(e.what()).find("budget exhausted") != std::string::npos);
    }
  }
  SUBCASE("topic alone too long") { CHECK_THROWS_AS(kpg::assemble_prompt(Stance::kPro, "T", args, 5), StageError); }
  SUBCASE("empty cluster") {
    CHECK_THROWS_AS(kpg::assemble_prompt(Stance::kPro, "T", std::vector<std::string>{}, 100), StageError);
  }
  SUBCASE("random budgets never overflow") {
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
      std::vector<std::string> many;
      for (int i = 0; i < 8; ++i) many.push_back(std::string(1 + rng.index(20), 'x'));
      const std::size_t budget = 15 + many[0].size() + rng.index(100);
      const auto p = kpg::assemble_prompt(Stance::kCon, "Topic", many, budget);
      CHECK(p.rendered.size() <= budget);
      std::string expect = "Negative Topic";
      for (const auto& a : p.arguments) expect += " " + a;
      CHECK(p.rendered == expect);
      CHECK(std::equal(p.arguments.begin(), p.arguments.end(), many.begin()));
    }
  }
}

TEST_CASE("extractive generator returns the medoid text") {
  const std::vector<std::string> texts{"t0", "t1", "t2", "t3", "t4"};
  const auto vecs = at_angles({0.0, 0.2, 0.4, 0.5, 0.9});
  const std::size_t m = embedding::medoid(vecs);
  CHECK(kpg::ExtractiveGenerator().generate(cluster_input(texts, vecs)) == texts[m]);
}

TEST_CASE("remote generator against a stub") {
  kpa::testing::StubServer stub([](httplib::Server& s) {
    s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
    s.Post("/generate", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      std::string text = "KP";
      if (body["prompt"].get<std::string>().find("long") != std::string::npos) text = "one two three four five";
      if (body["prompt"].get<std::string>().find("blank") != std::string::npos) text = "   ";
      res.set_content(nlohmann::json{{"text", text}}.dump(), "application/json");
    });
  });
  const kpg::RemoteGenerator gen(bridge::BridgeClient(stub.url()), 3);
  gen.health_check();
  const auto vecs = at_angles({0.0});
  CHECK(gen.generate(cluster_input({"short"}, vecs)) == "KP");
  CHECK(gen.generate(cluster_input({"long"}, vecs)) == "one two three");
  CHECK_THROWS_AS(gen.generate(cluster_input({"blank"}, vecs)), BackendError);
}

TEST_CASE("unreachable backend") {
  const kpg::RemoteGenerator gen(bridge::BridgeClient(kpa::testing::unused_url(), std::chrono::milliseconds(500)), 8);
  const auto vecs = at_angles({0.0, 1.0});
  try {
    gen.generate(cluster_input({"a", "b"}, vecs));
    FAIL("expected an error");
  } catch (const BackendError& e) {
    INFO(std::string(e.what()));
    CHECK(std::string(e.what()).find("backend unreachable") != std::string::npos);
  }
  CHECK_THROWS_AS(gen.health_check(), BackendError);
  const kpg::FallbackGenerator fallback(std::make_unique<kpg::RemoteGenerator>(
      bridge::BridgeClient(kpa::testing::unused_url(), std::chrono::milliseconds(500)), 8));
  CHECK(fallback.generate(cluster_input({"a", "b"}, vecs)) == "a");
}

TEST_CASE("dedup examples") {
  SUBCASE("near duplicates merge into the larger") {
    const std::vector<GeneratedKeyPoint> in{kp(1, 4), kp(2, 6)};
    const auto vecs = at_angles({0.0, std::acos(0.97)});
    const auto out = kpg::dedup_merge(in, vecs);
    REQUIRE(out.size() == 1);
    CHECK(out[0].text == "kp2");
    CHECK(out[0].effective_size == 10);
    CHECK(out[0].source_cluster_ids == std::vector<int>{1, 2});
  }
  SUBCASE("distinct key points are untouched") {
    const std::vector<GeneratedKeyPoint> in{kp(1, 4), kp(2, 6), kp(3, 1)};
    const auto out = kpg::dedup_merge(in, at_angles({0.0, 1.0, 2.0}));
    CHECK(out == in);
  }
  SUBCASE("merging is transitive") {
    const double s = std::acos(0.96);
    const std::vector<GeneratedKeyPoint> in{kp(1, 1), kp(2, 1), kp(3, 1)};
    const auto vecs = at_angles({0.0, s, 2 * s});
    CHECK(embedding::cosine(vecs[0], vecs[2]) < 0.95);
    const auto out = kpg::dedup_merge(in, vecs);
    REQUIRE(out.size() == 1);
    CHECK(out[0].id == 1);
    CHECK(out[0].effective_size == 3);
  }
}

TEST_CASE("dedup invariants on random sets") {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.index(12);
    std::vector<GeneratedKeyPoint> in;
    std::vector<double> angles;
    for (std::size_t i = 0; i < n; ++i) {
      in.push_back(kp(static_cast<int>(i), 1 + rng.index(9)));
      angles.push_back(rng.uniform(0, 1.2));
    }
    const auto vecs = at_angles(angles);
    const auto out = kpg::dedup_merge(in, vecs);
    std::size_t before = 0, after = 0;
    for (const auto& k : in) before += k.effective_size;
    for (const auto& k : out) after += k.effective_size;
    CHECK(before == after);
    std::set<int> sources;
    for (const auto& k : out) {
      for (const int s : k.source_cluster_ids) CHECK(sources.insert(s).second);
    }
    CHECK(sources.size() == n);
    for (std::size_t a = 0; a < out.size(); ++a) {
      for (std::size_t b = a + 1; b < out.size(); ++b) {
        CHECK(embedding::cosine(vecs[static_cast<std::size_t>(out[a].id)],
                                vecs[static_cast<std::size_t>(out[b].id)]) < 0.95);
      }
    }
  }
}

TEST_CASE("rank and truncate") {
  SUBCASE("size decides") {
    const auto set = kpg::rank_and_truncate("T", Stance::kPro, {kp(0, 6), kp(1, 4), kp(2, 5)}, 2);
    REQUIRE(set.key_points.size() == 2);
    CHECK(set.key_points[0].effective_size == 6);
    CHECK(set.key_points[1].effective_size == 5);
    CHECK(set.key_points[0].rank == 1);
    CHECK(set.key_points[1].rank == 2);
  }
  SUBCASE("n above count keeps all") {
    const auto set = kpg::rank_and_truncate("T", Stance::kPro, {kp(0, 1), kp(1, 3), kp(2, 2)}, 10);
    REQUIRE(set.key_points.size() == 3);
    CHECK(set.key_points[0].id == 1);
    CHECK(set.key_points[2].id == 0);
  }
  SUBCASE("centrality breaks size ties, then id") {
    const auto set = kpg::rank_and_truncate("T", Stance::kPro, {kp(0, 3, 0.4), kp(1, 3, 0.6), kp(2, 3, 0.4)}, 3);
    CHECK(set.key_points[0].id == 1);
    CHECK(set.key_points[1].id == 0);
    CHECK(set.key_points[2].id == 2);
  }
  SUBCASE("n must be positive") {
    CHECK_THROWS_AS(kpg::rank_and_truncate("T", Stance::kPro, {kp(0, 1)}, 0), UsageError);
  }
  SUBCASE("order is total and independent of input order") {
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
      std::vector<GeneratedKeyPoint> in;
      for (int i = 0; i < 10; ++i) in.push_back(kp(i, 1 + rng.index(3), 0.1 * static_cast<double>(rng.index(3))));
      auto shuffled = in;
      std::reverse(shuffled.begin(), shuffled.end());
      const std::size_t n = 1 + rng.index(12);
      const auto a = kpg::rank_and_truncate("T", Stance::kPro, in, n);
      const auto b = kpg::rank_and_truncate("T", Stance::kPro, shuffled, n);
      CHECK(a.key_points == b.key_points);
      CHECK(a.key_points.size() == std::min<std::size_t>(n, 10));
    }
  }
}

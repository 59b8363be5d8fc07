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
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "kpa/augment.hpp"
#include "kpa/error.hpp"
#include "kpa/rng.hpp"
#include "temp_dir.hpp"

using namespace kpa;
using augment::AugmentedPair;

namespace {

// The generated text carries its own score.
const eval::FunctionScorer kScoreFromText(
    [](const std::string& generated, const std::string&) { return std::stod(generated); }, {0.0, 1.0}, false,
    "literal");

std::vector<AugmentedPair> pairs_with(const std::vector<double>& scores) {
  std::vector<AugmentedPair> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.push_back({"p" + std::to_string(i), "orig", std::to_string(scores[i]), std::nullopt, 0.0});
  }
  return out;
}

std::vector<std::string> ids(const std::vector<AugmentedPair>& pairs) {
  std::vector<std::string> out;
  for (const auto& p : pairs) out.push_back(p.id);
  return out;
}

}  // namespace

TEST_CASE("quality filter examples") {
  SUBCASE("lowest quarter goes") {
    const auto kept = augment::quality_filter(pairs_with({0.5, 0.1, 0.9, 0.7}), kScoreFromText);
    CHECK(ids(kept) == std::vector<std::string>{"p0", "p2", "p3"});
    CHECK(kept[0].score == 0.5);
  }
  SUBCASE("zero fraction keeps everything") {
    const auto kept = augment::quality_filter(pairs_with({0.5, 0.1, 0.9}), kScoreFromText, 0.0);
    CHECK(kept.size() == 3);
  }
  SUBCASE("floor of the fraction") {
    CHECK(augment::quality_filter(pairs_with({0.1, 0.2, 0.3, 0.4, 0.5}), kScoreFromText).size() == 4);
    CHECK(augment::quality_filter(pairs_with({0.1, 0.2, 0.3}), kScoreFromText).size() == 3);
  }
  SUBCASE("ties drop the higher id") {
    const auto kept = augment::quality_filter(pairs_with({0.3, 0.3, 0.3, 0.3}), kScoreFromText, 0.5);
    CHECK(ids(kept) == std::vector<std::string>{"p0", "p1"});
  }
  SUBCASE("scorer sees (generated, original)") {
    std::vector<std::pair<std::string, std::string>> seen;
    const eval::FunctionScorer spy(
        [&seen](const std::string& c, const std::string& r) {
          seen.emplace_back(c, r);
          return 0.5;
        },
        {0.0, 1.0}, false);
    augment::quality_filter({{"x", "the original", "the paraphrase", std::nullopt, 0.0}}, spy);
    REQUIRE(seen.size() == 1);
    CHECK(seen[0].first == "the paraphrase");
    CHECK(seen[0].second == "the original");
  }
  SUBCASE("per topic cut") {
    auto pairs = pairs_with({0.1, 0.2, 0.3, 0.4, 0.9, 0.8, 0.7, 0.6});
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].topic = i < 4 ? "A" : "B";
    CHECK(ids(augment::quality_filter(pairs, kScoreFromText, 0.25, true)) ==
          std::vector<std::string>{"p1", "p2", "p3", "p4", "p5", "p6"});
    CHECK(ids(augment::quality_filter(pairs, kScoreFromText, 0.25, false)) ==
          std::vector<std::string>{"p2", "p3", "p4", "p5", "p6", "p7"});
  }
}

TEST_CASE("quality filter preconditions") {
  CHECK_THROWS_AS(augment::quality_filter(pairs_with({0.1}), kScoreFromText, 1.0), UsageError);
  CHECK_THROWS_AS(augment::quality_filter(pairs_with({0.1}), kScoreFromText, -0.1), UsageError);
  CHECK_THROWS_AS(augment::quality_filter({}, kScoreFromText), InputError);
  CHECK_THROWS_AS(augment::quality_filter({{"x", "o", "  ", std::nullopt, 0.0}}, kScoreFromText), InputError);
}

TEST_CASE("quality filter invariants") {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.index(30);
    std::vector<double> scores(n);
    for (auto& s : scores) s = static_cast<double>(rng.index(10)) / 10.0;
    const double frac = rng.uniform(0.0, 0.99);
    const auto input = pairs_with(scores);
    const auto kept = augment::quality_filter(input, kScoreFromText, frac);
    CHECK(kept.size() == n - static_cast<std::size_t>(std::floor(frac * static_cast<double>(n))));

    std::set<std::string> kept_ids;
    double kept_min = 2.0;
    for (const auto& p : kept) {
      kept_ids.insert(p.id);
      kept_min = std::min(kept_min, p.score);
    }
    for (const auto& p : input) {
      if (kept_ids.count(p.id) == 0) CHECK(std::stod(p.generated) <= kept_min);
    }
    // Input order is preserved.
    auto ordered = ids(kept);
    CHECK(std::is_sorted(ordered.begin(), ordered.end(), [&](const std::string& a, const std::string& b) {
      return std::stoi(a.substr(1)) < std::stoi(b.substr(1));
    }));
    CHECK(augment::quality_filter(input, kScoreFromText, frac) == kept);
  }
}

TEST_CASE("augmented pair files") {
  kpa::testing::TempDir dir;
  const auto path = dir.write("pairs.jsonl",
                              "{\"id\":\"a\",\"original\":\"o1\",\"generated\":\"g1\",\"topic\":\"T\"}\n"
                              "{\"id\":7,\"original\":\"o2\",\"generated\":\"g2\"}\n");
  const auto pairs = augment::load_pairs(path);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].topic == std::optional<std::string>("T"));
  CHECK(pairs[1].id == "7");
  CHECK_FALSE(pairs[1].topic.has_value());
  const auto round = dir.write("round.jsonl", augment::to_jsonl(pairs));
  const auto again = augment::load_pairs(round);
  CHECK(again[0].id == "a");
  CHECK(again[1].generated == "g2");

  CHECK_THROWS_AS(augment::load_pairs(dir.write("bad.jsonl", "{\"id\":\"a\",\"original\":\"o\"}\n")), InputError);
  CHECK_THROWS_AS(augment::load_pairs(dir.write("empty.jsonl", "")), InputError);
}

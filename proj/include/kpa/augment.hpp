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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kpa/eval.hpp"

namespace kpa::augment {

struct AugmentedPair {
  std::string id;
  std::string original;
  std::string generated;
  std::optional<std::string> topic;
  double score = 0.0;  // set by quality_filter

  bool operator==(const AugmentedPair&) const = default;
};

inline constexpr double kDefaultDropFraction = 0.25;

// Scores every pair as f(generated, original) and removes the
// floor(drop_fraction * n) lowest-scoring pairs; at equal scores the higher
// id goes first. With per_topic the cut is applied within each topic.
// Retained pairs keep their input order.
std::vector<AugmentedPair> quality_filter(std::vector<AugmentedPair> pairs,
                                          const eval::PairScorer& scorer,
                                          double drop_fraction = kDefaultDropFraction,
                                          bool per_topic = false);

// JSONL {"id", "original", "generated"[, "topic"]}.
std::vector<AugmentedPair> load_pairs(const std::filesystem::path& path);
// Same schema plus "score".
std::string to_jsonl(const std::vector<AugmentedPair>& pairs);

}  // namespace kpa::augment

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
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kpa/bridge.hpp"
#include "kpa/corpus.hpp"
#include "kpa/embedding.hpp"

namespace kpa::kpg {

// "{Stance} {Topic} {arguments...}" generator input.
struct Prompt {
  std::string stance_word;  // "Positive" or "Negative"
  std::string topic;
  std::vector<std::string> arguments;  // the arguments that fit the budget
  std::string rendered;
};

std::string_view stance_word(corpus::Stance stance);

inline constexpr std::size_t kDefaultBudget = 2000;

// `ordered_args` is most-central first; arguments are dropped from the tail
// until the rendered prompt fits `budget` characters. Throws StageError
// ("budget exhausted") when not even the first argument fits.
Prompt assemble_prompt(corpus::Stance stance, std::string_view topic,
                       std::span<const std::string> ordered_args, std::size_t budget);

// Everything a backend may use for one cluster.
struct ClusterInput {
  Prompt prompt;
  std::vector<std::string> member_texts;  // in prompt order, untruncated
  std::vector<embedding::Vector> member_vectors;
};

class Generator {
 public:
  virtual ~Generator() = default;
  // Non-empty key-point text. Must be safe to call concurrently.
  virtual std::string generate(const ClusterInput& input) const = 0;
};

// Returns the text of the cluster's medoid argument.
class ExtractiveGenerator : public Generator {
 public:
  std::string generate(const ClusterInput& input) const override;
};

// Delegates to the bridge's /generate; output is cut to max_new_tokens
// whitespace-separated tokens.
class RemoteGenerator : public Generator {
 public:
  RemoteGenerator(bridge::BridgeClient client, int max_new_tokens);
  std::string generate(const ClusterInput& input) const override;
  void health_check() const;

 private:
  bridge::BridgeClient client_;
  int max_new_tokens_;
};

// Uses `primary`, falling back to extractive generation on BackendError.
class FallbackGenerator : public Generator {
 public:
  explicit FallbackGenerator(std::unique_ptr<Generator> primary) : primary_(std::move(primary)) {}
  std::string generate(const ClusterInput& input) const override;

 private:
  std::unique_ptr<Generator> primary_;
  ExtractiveGenerator fallback_;
};

struct GeneratedKeyPoint {
  int id = 0;
  std::string text;
  std::vector<int> source_cluster_ids;  // ascending
  std::size_t effective_size = 0;
  double centrality = 0.0;
  int rank = 0;

  bool operator==(const GeneratedKeyPoint&) const = default;
};

struct KeyPointSet {
  std::string topic_id;
  corpus::Stance stance = corpus::Stance::kPro;
  std::vector<GeneratedKeyPoint> key_points;  // rank order
};

inline constexpr double kDedupThreshold = 0.95;

// Merges connected components of the "cosine >= threshold" graph. The
// survivor keeps the text and id of the member with the largest
// effective_size (ties: lowest id); sizes add up and sources are united.
// `embeddings[i]` belongs to `kps[i]`. Output is sorted by id.
std::vector<GeneratedKeyPoint> dedup_merge(const std::vector<GeneratedKeyPoint>& kps,
                                           std::span<const embedding::Vector> embeddings,
                                           double threshold = kDedupThreshold);

// Sorted by effective_size desc, centrality desc, id asc; first min(n, count)
// kept and ranked from 1.
KeyPointSet rank_and_truncate(std::string topic_id, corpus::Stance stance,
                              std::vector<GeneratedKeyPoint> kps, std::size_t n);

}  // namespace kpa::kpg

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

#include "kpa/kpg.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "kpa/error.hpp"

namespace kpa::kpg {

std::string_view stance_word(corpus::Stance stance) {
  return stance == corpus::Stance::kPro ? "Positive" : "Negative";
}

Prompt assemble_prompt(corpus::Stance stance, std::string_view topic,
                       std::span<const std::string> ordered_args, std::size_t budget) {
  if (ordered_args.empty()) throw StageError("cannot build a prompt for an empty cluster");
  Prompt p;
  p.stance_word = std::string(stance_word(stance));
  p.topic = std::string(topic);
  std::string rendered = p.stance_word + " " + p.topic;
  if (rendered.size() > budget) {
    throw StageError("budget exhausted: stance and topic alone need " +
                     std::to_string(rendered.size()) + " characters (budget " +
                     std::to_string(budget) + ")");
  }
  for (const auto& arg : ordered_args) {
    if (rendered.size() + 1 + arg.size() > budget) break;
    rendered += ' ';
    rendered += arg;
    p.arguments.push_back(arg);
  }
  if (p.arguments.empty()) {
    throw StageError("budget exhausted: the first argument does not fit in " +
                     std::to_string(budget) + " characters");
  }
  p.rendered = std::move(rendered);
  return p;
}

std::string ExtractiveGenerator::generate(const ClusterInput& input) const {
  if (input.member_vectors.empty() || input.member_vectors.size() != input.member_texts.size()) {
    throw StageError("extractive generation needs one vector per member");
  }
  return input.member_texts[embedding::medoid(input.member_vectors)];
}

RemoteGenerator::RemoteGenerator(bridge::BridgeClient client, int max_new_tokens)
    : client_(std::move(client)), max_new_tokens_(max_new_tokens) {
  if (max_new_tokens_ < 1) throw UsageError("max_new_tokens must be >= 1");
}

void RemoteGenerator::health_check() const { client_.health(); }

std::string RemoteGenerator::generate(const ClusterInput& input) const {
  const std::string raw = client_.generate(input.prompt.rendered, max_new_tokens_);
  std::istringstream in(raw);
  std::string token;
  std::string out;
  for (int count = 0; count < max_new_tokens_ && in >> token; ++count) {
    if (!out.empty()) out += ' ';
    out += token;
  }
  if (out.empty()) throw BackendError("empty generation from " + client_.url());
  return out;
}

std::string FallbackGenerator::generate(const ClusterInput& input) const {
  try {
    return primary_->generate(input);
  } catch (const BackendError&) {
    return fallback_.generate(input);
  }
}

std::vector<GeneratedKeyPoint> dedup_merge(const std::vector<GeneratedKeyPoint>& kps,
                                           std::span<const embedding::Vector> embeddings,
                                           double threshold) {
  if (kps.size() != embeddings.size()) {
    throw StageError("dedup needs one embedding per key point");
  }
  const std::size_t n = kps.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (embedding::cosine(embeddings[i], embeddings[j]) >= threshold) {
        parent[find(j)] = find(i);
      }
    }
  }

  std::vector<std::vector<std::size_t>> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);

  std::vector<GeneratedKeyPoint> out;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    std::size_t rep = g.front();
    std::size_t total = 0;
    std::set<int> sources;
    for (const std::size_t i : g) {
      const auto& k = kps[i];
      total += k.effective_size;
      sources.insert(k.source_cluster_ids.begin(), k.source_cluster_ids.end());
      if (k.effective_size > kps[rep].effective_size ||
          (k.effective_size == kps[rep].effective_size && k.id < kps[rep].id)) {
        rep = i;
      }
    }
    GeneratedKeyPoint merged = kps[rep];
    merged.effective_size = total;
    merged.source_cluster_ids.assign(sources.begin(), sources.end());
    out.push_back(std::move(merged));
  }
  std::sort(out.begin(), out.end(),
            [](const GeneratedKeyPoint& a, const GeneratedKeyPoint& b) { return a.id < b.id; });
  return out;
}

KeyPointSet rank_and_truncate(std::string topic_id, corpus::Stance stance,
                              std::vector<GeneratedKeyPoint> kps, std::size_t n) {
  if (n < 1) throw UsageError("the number of key points to keep must be >= 1");
  std::sort(kps.begin(), kps.end(), [](const GeneratedKeyPoint& a, const GeneratedKeyPoint& b) {
    if (a.effective_size != b.effective_size) return a.effective_size > b.effective_size;
    if (a.centrality != b.centrality) return a.centrality > b.centrality;
    return a.id < b.id;
  });
  if (kps.size() > n) kps.resize(n);
  for (std::size_t i = 0; i < kps.size(); ++i) kps[i].rank = static_cast<int>(i + 1);
  return {std::move(topic_id), stance, std::move(kps)};
}

}  // namespace kpa::kpg

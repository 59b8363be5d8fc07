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

#include "kpa/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"
#include "kpa/error.hpp"
#include "kpa/io.hpp"

namespace kpa::augment {
namespace {

// Indices (into `pairs`) removed by the cut over the subset `members`.
std::vector<std::size_t> lowest(const std::vector<AugmentedPair>& pairs,
                                std::vector<std::size_t> members, double drop_fraction) {
  const auto drop = static_cast<std::size_t>(
      std::floor(drop_fraction * static_cast<double>(members.size())));
  std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
    if (pairs[a].score != pairs[b].score) return pairs[a].score < pairs[b].score;
    return pairs[a].id > pairs[b].id;
  });
  members.resize(drop);
  return members;
}

}  // namespace

std::vector<AugmentedPair> quality_filter(std::vector<AugmentedPair> pairs,
                                          const eval::PairScorer& scorer, double drop_fraction,
                                          bool per_topic) {
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) {
    throw UsageError("drop fraction must lie in [0, 1)");
  }
  if (pairs.empty()) throw InputError("quality filter needs at least one pair");
  for (const auto& p : pairs) {
    if (io::trim(p.original).empty() || io::trim(p.generated).empty()) {
      throw InputError("augmented pair '" + p.id + "' has an empty text");
    }
  }

  std::vector<eval::TextPair> batch;
  batch.reserve(pairs.size());
  for (const auto& p : pairs) batch.emplace_back(p.generated, p.original);
  const std::vector<double> scores = scorer.score_pairs(batch);
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].score = scores[i];

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    groups[per_topic ? pairs[i].topic.value_or("") : ""].push_back(i);
  }
  std::vector<bool> dropped(pairs.size(), false);
  for (auto& [topic, members] : groups) {
    for (const std::size_t i : lowest(pairs, members, drop_fraction)) dropped[i] = true;
  }

  std::vector<AugmentedPair> kept;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!dropped[i]) kept.push_back(std::move(pairs[i]));
  }
  return kept;
}

std::vector<AugmentedPair> load_pairs(const std::filesystem::path& path) {
  std::vector<AugmentedPair> out;
  for (const auto& line : io::read_jsonl(path)) {
    const std::string where = path.string() + ":" + std::to_string(line.line);
    const auto& v = line.value;
    if (!v.contains("id") || !v.contains("original") || !v.contains("generated") ||
        !v["original"].is_string() || !v["generated"].is_string()) {
      throw InputError(where + ": malformed row: expected {\"id\", \"original\", \"generated\"}");
    }
    AugmentedPair p;
    p.id = v["id"].is_string() ? v["id"].get<std::string>() : v["id"].dump();
    p.original = v["original"].get<std::string>();
    p.generated = v["generated"].get<std::string>();
    if (v.contains("topic") && v["topic"].is_string()) p.topic = v["topic"].get<std::string>();
    out.push_back(std::move(p));
  }
  if (out.empty()) throw InputError(path.string() + ": empty file (no pairs)");
  return out;
}

std::string to_jsonl(const std::vector<AugmentedPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json row;
    row["id"] = p.id;
    row["original"] = p.original;
    row["generated"] = p.generated;
    if (p.topic) row["topic"] = *p.topic;
    row["score"] = p.score;
    out += row.dump();
    out += '\n';
  }
  return out;
}

}  // namespace kpa::augment

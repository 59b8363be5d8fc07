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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kpa::corpus {

enum class Stance { kPro, kCon };

// Accepts pro/con, 1/-1 and positive/negative, case-insensitively.
Stance parse_stance(std::string_view token);
std::string_view stance_name(Stance stance);  // "pro" or "con"

// Topics are keyed by their motion text, which is how the argument files
// reference them.
struct Topic {
  std::string id;
  std::string text;
  bool operator==(const Topic&) const = default;
};

struct Argument {
  std::string id;
  std::string text;
  std::string topic_id;
  Stance stance = Stance::kPro;
  bool operator==(const Argument&) const = default;
};

struct ReferenceKeyPoint {
  std::string id;
  std::string text;
  std::string topic_id;
  Stance stance = Stance::kPro;
  bool operator==(const ReferenceKeyPoint&) const = default;
};

struct MatchLabel {
  std::string arg_id;
  std::string kp_id;
  int label = 0;
  bool operator==(const MatchLabel&) const = default;
};

struct CorpusCounts {
  std::size_t arguments = 0;
  std::size_t key_points = 0;
  std::size_t labels = 0;
  bool operator==(const CorpusCounts&) const = default;
};

// Validated, immutable collection of arguments, reference key points and
// match labels. All cross references resolve.
class Corpus {
 public:
  Corpus() = default;

  // `*_origins`, when non-empty, give a "file:line" location per item for
  // error messages.
  Corpus(std::vector<Argument> arguments, std::vector<ReferenceKeyPoint> key_points,
         std::vector<MatchLabel> labels, const std::vector<std::string>& argument_origins = {},
         const std::vector<std::string>& key_point_origins = {},
         const std::vector<std::string>& label_origins = {});

  const std::vector<Topic>& topics() const { return topics_; }
  const std::vector<Argument>& arguments() const { return arguments_; }
  const std::vector<ReferenceKeyPoint>& reference_kps() const { return key_points_; }
  const std::vector<MatchLabel>& labels() const { return labels_; }

  const Argument* find_argument(std::string_view id) const;
  const ReferenceKeyPoint* find_key_point(std::string_view id) const;
  const Topic* find_topic(std::string_view id) const;

  // Reference key points of one (topic, stance), in file order.
  std::vector<const ReferenceKeyPoint*> reference_kps_for(std::string_view topic_id,
                                                          Stance stance) const;

  CorpusCounts counts() const {
    return {arguments_.size(), key_points_.size(), labels_.size()};
  }

  bool operator==(const Corpus& other) const {
    return topics_ == other.topics_ && arguments_ == other.arguments_ &&
           key_points_ == other.key_points_ && labels_ == other.labels_;
  }

 private:
  std::vector<Topic> topics_;
  std::vector<Argument> arguments_;
  std::vector<ReferenceKeyPoint> key_points_;
  std::vector<MatchLabel> labels_;
  std::map<std::string, std::size_t, std::less<>> argument_index_;
  std::map<std::string, std::size_t, std::less<>> key_point_index_;
  std::map<std::string, std::size_t, std::less<>> topic_index_;
};

enum class FileFormat { kCsv, kJsonl };

FileFormat parse_format(std::string_view name);
// ".jsonl"/".json" map to JSONL, everything else to CSV.
FileFormat format_from_extension(const std::filesystem::path& path);

struct CorpusPaths {
  std::filesystem::path arguments;
  std::optional<std::filesystem::path> key_points;
  std::optional<std::filesystem::path> labels;
  std::optional<FileFormat> format;  // extension-based when unset
};

// CSV columns: arg_id,argument,topic,stance / key_point_id,key_point,topic,stance /
// arg_id,key_point_id,label. JSONL objects use the same field names.
Corpus load_corpus(const CorpusPaths& paths);

// Loads a key-point file on its own, e.g. as evaluation references.
std::vector<ReferenceKeyPoint> load_key_points(const std::filesystem::path& path,
                                               std::optional<FileFormat> format = {});

struct Partition {
  std::string topic_id;
  Stance stance = Stance::kPro;
  std::vector<std::string> arg_ids;
  bool operator==(const Partition&) const = default;
};

// One partition per (topic, stance) that has arguments. Topics appear in
// first-seen order, pro before con, arguments in file order.
std::vector<Partition> partition_corpus(const Corpus& corpus);

}  // namespace kpa::corpus

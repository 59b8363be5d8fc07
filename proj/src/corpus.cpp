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

#include "kpa/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "kpa/error.hpp"
#include "kpa/io.hpp"

namespace kpa::corpus {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// One parsed record of any of the three files, already reduced to strings.
struct Record {
  std::string origin;
  std::map<std::string, std::string, std::less<>> fields;

  const std::string& get(std::string_view name) const { return fields.find(name)->second; }
};

std::string json_scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  throw InputError("expected a string or number");
}

std::vector<Record> read_records(const std::filesystem::path& path, FileFormat format,
                                 const std::vector<std::string>& columns) {
  std::vector<Record> out;
  if (format == FileFormat::kCsv) {
    const io::CsvTable table = io::read_csv(path);
    if (table.header.empty()) throw InputError(path.string() + ": empty file");
    std::vector<int> index;
    for (const auto& col : columns) {
      const int c = table.column(col);
      if (c < 0) {
        throw InputError(path.string() + ":1: malformed header: missing column '" + col + "'");
      }
      index.push_back(c);
    }
    for (const auto& row : table.rows) {
      Record rec;
      rec.origin = path.string() + ":" + std::to_string(row.line);
      for (std::size_t k = 0; k < columns.size(); ++k) {
        rec.fields.emplace(columns[k], row.fields[static_cast<std::size_t>(index[k])]);
      }
      out.push_back(std::move(rec));
    }
  } else {
    for (const auto& line : io::read_jsonl(path)) {
      Record rec;
      rec.origin = path.string() + ":" + std::to_string(line.line);
      for (const auto& col : columns) {
        const auto it = line.value.find(col);
        if (it == line.value.end()) {
          throw InputError(rec.origin + ": malformed row: missing field '" + col + "'");
        }
        try {
          rec.fields.emplace(col, json_scalar_to_string(*it));
        } catch (const InputError& e) {
          throw InputError(rec.origin + ": malformed row: field '" + col + "': " + e.what());
        }
      }
      out.push_back(std::move(rec));
    }
  }
  if (out.empty()) throw InputError(path.string() + ": empty file (no data rows)");
  return out;
}

std::string required_text(const Record& rec, std::string_view field) {
  const std::string_view t = io::trim(rec.get(field));
  if (t.empty()) {
    throw InputError(rec.origin + ": empty " + std::string(field) + " (whitespace-only text)");
  }
  return std::string(t);
}

Stance stance_at(const Record& rec) {
  try {
    return parse_stance(rec.get("stance"));
  } catch (const InputError& e) {
    throw InputError(rec.origin + ": " + e.what());
  }
}

std::string origin_of(const std::vector<std::string>& origins, std::string_view kind,
                      std::size_t i) {
  if (i < origins.size()) return origins[i];
  return std::string(kind) + " #" + std::to_string(i + 1);
}

}  // namespace

Stance parse_stance(std::string_view token) {
  const std::string t = lower(io::trim(token));
  if (t == "pro" || t == "1" || t == "+1" || t == "positive") return Stance::kPro;
  if (t == "con" || t == "-1" || t == "negative") return Stance::kCon;
  throw InputError("unknown stance '" + std::string(token) + "'");
}

std::string_view stance_name(Stance stance) {
  return stance == Stance::kPro ? "pro" : "con";
}

Corpus::Corpus(std::vector<Argument> arguments, std::vector<ReferenceKeyPoint> key_points,
               std::vector<MatchLabel> labels, const std::vector<std::string>& argument_origins,
               const std::vector<std::string>& key_point_origins,
               const std::vector<std::string>& label_origins)
    : arguments_(std::move(arguments)),
      key_points_(std::move(key_points)),
      labels_(std::move(labels)) {
  const auto add_topic = [this](const std::string& topic) {
    if (topic_index_.emplace(topic, topics_.size()).second) topics_.push_back({topic, topic});
  };

  for (std::size_t i = 0; i < arguments_.size(); ++i) {
    const Argument& a = arguments_[i];
    const std::string where = origin_of(argument_origins, "argument", i);
    if (io::trim(a.id).empty()) throw InputError(where + ": empty arg_id");
    if (io::trim(a.text).empty()) throw InputError(where + ": empty argument (whitespace-only text)");
    if (io::trim(a.topic_id).empty()) throw InputError(where + ": empty topic");
    if (!argument_index_.emplace(a.id, i).second) {
      throw InputError(where + ": duplicate arg_id '" + a.id + "'");
    }
    add_topic(a.topic_id);
  }
  for (std::size_t i = 0; i < key_points_.size(); ++i) {
    const ReferenceKeyPoint& k = key_points_[i];
    const std::string where = origin_of(key_point_origins, "key point", i);
    if (io::trim(k.id).empty()) throw InputError(where + ": empty key_point_id");
    if (io::trim(k.text).empty()) throw InputError(where + ": empty key_point (whitespace-only text)");
    if (io::trim(k.topic_id).empty()) throw InputError(where + ": empty topic");
    if (!key_point_index_.emplace(k.id, i).second) {
      throw InputError(where + ": duplicate key_point_id '" + k.id + "'");
    }
    add_topic(k.topic_id);
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const MatchLabel& l = labels_[i];
    const std::string where = origin_of(label_origins, "label", i);
    const Argument* a = find_argument(l.arg_id);
    if (a == nullptr) {
      throw InputError(where + ": dangling reference: arg_id '" + l.arg_id + "' not found");
    }
    const ReferenceKeyPoint* k = find_key_point(l.kp_id);
    if (k == nullptr) {
      throw InputError(where + ": dangling reference: key_point_id '" + l.kp_id + "' not found");
    }
    if (a->topic_id != k->topic_id || a->stance != k->stance) {
      throw InputError(where + ": label pairs argument '" + l.arg_id + "' and key point '" +
                       l.kp_id + "' from different topic/stance");
    }
    if (l.label != 0 && l.label != 1) {
      throw InputError(where + ": label must be 0 or 1");
    }
    if (!seen.emplace(l.arg_id, l.kp_id).second) {
      throw InputError(where + ": duplicate label for (" + l.arg_id + ", " + l.kp_id + ")");
    }
  }
}

const Argument* Corpus::find_argument(std::string_view id) const {
  const auto it = argument_index_.find(id);
  return it == argument_index_.end() ? nullptr : &arguments_[it->second];
}

const ReferenceKeyPoint* Corpus::find_key_point(std::string_view id) const {
  const auto it = key_point_index_.find(id);
  return it == key_point_index_.end() ? nullptr : &key_points_[it->second];
}

const Topic* Corpus::find_topic(std::string_view id) const {
  const auto it = topic_index_.find(id);
  return it == topic_index_.end() ? nullptr : &topics_[it->second];
}

std::vector<const ReferenceKeyPoint*> Corpus::reference_kps_for(std::string_view topic_id,
                                                                Stance stance) const {
  std::vector<const ReferenceKeyPoint*> out;
  for (const auto& k : key_points_) {
    if (k.topic_id == topic_id && k.stance == stance) out.push_back(&k);
  }
  return out;
}

FileFormat parse_format(std::string_view name) {
  const std::string n = lower(name);
  if (n == "csv") return FileFormat::kCsv;
  if (n == "jsonl") return FileFormat::kJsonl;
  throw UsageError("unknown format '" + std::string(name) + "' (expected csv or jsonl)");
}

FileFormat format_from_extension(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  return ext == ".jsonl" || ext == ".json" ? FileFormat::kJsonl : FileFormat::kCsv;
}

std::vector<ReferenceKeyPoint> load_key_points(const std::filesystem::path& path,
                                               std::optional<FileFormat> format) {
  std::vector<ReferenceKeyPoint> out;
  for (const auto& rec : read_records(path, format.value_or(format_from_extension(path)),
                                      {"key_point_id", "key_point", "topic", "stance"})) {
    out.push_back({std::string(io::trim(rec.get("key_point_id"))),
                   required_text(rec, "key_point"), required_text(rec, "topic"),
                   stance_at(rec)});
  }
  return out;
}

Corpus load_corpus(const CorpusPaths& paths) {
  const auto fmt = [&](const std::filesystem::path& p) {
    return paths.format.value_or(format_from_extension(p));
  };

  std::vector<Argument> arguments;
  std::vector<std::string> argument_origins;
  for (const auto& rec :
       read_records(paths.arguments, fmt(paths.arguments), {"arg_id", "argument", "topic", "stance"})) {
    arguments.push_back({std::string(io::trim(rec.get("arg_id"))), required_text(rec, "argument"),
                         required_text(rec, "topic"), stance_at(rec)});
    argument_origins.push_back(rec.origin);
  }

  std::vector<ReferenceKeyPoint> key_points;
  std::vector<std::string> key_point_origins;
  if (paths.key_points) {
    for (const auto& rec : read_records(*paths.key_points, fmt(*paths.key_points),
                                        {"key_point_id", "key_point", "topic", "stance"})) {
      key_points.push_back({std::string(io::trim(rec.get("key_point_id"))),
                            required_text(rec, "key_point"), required_text(rec, "topic"),
                            stance_at(rec)});
      key_point_origins.push_back(rec.origin);
    }
  }

  std::vector<MatchLabel> labels;
  std::vector<std::string> label_origins;
  if (paths.labels) {
    if (!paths.key_points) throw UsageError("a labels file requires a key-points file");
    for (const auto& rec :
         read_records(*paths.labels, fmt(*paths.labels), {"arg_id", "key_point_id", "label"})) {
      const std::string raw(io::trim(rec.get("label")));
      int label = -1;
      if (raw == "0" || raw == "0.0") label = 0;
      if (raw == "1" || raw == "1.0") label = 1;
      if (label < 0) throw InputError(rec.origin + ": label must be 0 or 1, got '" + raw + "'");
      labels.push_back({std::string(io::trim(rec.get("arg_id"))),
                        std::string(io::trim(rec.get("key_point_id"))), label});
      label_origins.push_back(rec.origin);
    }
  }

  return Corpus(std::move(arguments), std::move(key_points), std::move(labels),
                argument_origins, key_point_origins, label_origins);
}

std::vector<Partition> partition_corpus(const Corpus& corpus) {
  std::vector<Partition> out;
  for (const Topic& topic : corpus.topics()) {
    for (const Stance stance : {Stance::kPro, Stance::kCon}) {
      Partition p{topic.id, stance, {}};
      for (const Argument& a : corpus.arguments()) {
        if (a.topic_id == topic.id && a.stance == stance) p.arg_ids.push_back(a.id);
      }
      if (!p.arg_ids.empty()) out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace kpa::corpus

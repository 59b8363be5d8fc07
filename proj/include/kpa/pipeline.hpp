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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kpa/corpus.hpp"
#include "kpa/embedding.hpp"
#include "kpa/eval.hpp"
#include "kpa/ic.hpp"
#include "kpa/kpg.hpp"
#include "kpa/kpm.hpp"
#include "kpa/reduction.hpp"
#include "kpa/textrank.hpp"

namespace kpa::pipeline {

enum class BackendKind { kExtractive, kRemote };
enum class ScorerKind { kCosine, kRemote, kRouge1 };

struct PipelineConfig {
  corpus::CorpusPaths corpus;
  std::optional<std::filesystem::path> embeddings;
  std::string embed_endpoint;  // bridge used when no embedding file is given
  std::optional<std::filesystem::path> reduced_embeddings;
  reduction::ReducerConfig reducer;
  kpm::KpmConfig kpm;
  ic::IcConfig ic;
  textrank::TextRankConfig textrank;
  BackendKind backend = BackendKind::kExtractive;
  std::string endpoint;
  int max_new_tokens = 64;
  std::size_t budget = kpg::kDefaultBudget;
  std::size_t max_kps = 8;
  bool allow_fallback = false;
  double dedup_threshold = kpg::kDedupThreshold;
  ScorerKind scorer = ScorerKind::kCosine;
  std::string metric = "bleurt";
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::size_t jobs = 1;

  // Everything that influences outputs (not out_dir or jobs), keyed by
  // flag name.
  nlohmann::ordered_json echo() const;
  // 16 hex digits of FNV-1a over echo().dump().
  std::string hash() const;
};

// Builds a config from a JSON object whose keys are the command-line flag
// names without leading dashes ("lambda", "min-cluster-size", ...). Values
// may be typed or strings. Unknown keys are a UsageError.
PipelineConfig config_from_settings(const nlohmann::json& settings);
const std::vector<std::string>& setting_names();

struct Inputs {
  corpus::Corpus corpus;
  embedding::EmbeddingStore embeddings;  // exactly the argument ids
  std::optional<embedding::EmbeddingStore> reduced;  // externally reduced vectors
  std::shared_ptr<const embedding::Encoder> encoder;  // for key-point texts
};

Inputs load_inputs(const PipelineConfig& config);

struct PartitionClusters {
  corpus::Partition partition;
  kpm::ClusterSet clusters;
  std::map<int, std::vector<std::string>> secondary;  // cluster id -> extra members
  std::string stage = "kpm";  // "kpm" before iterative clustering, "ic" after
};

// Density (or kmeans) clustering of every partition.
std::vector<PartitionClusters> cluster_stage(const PipelineConfig& config, const Inputs& inputs);
// Iterative clustering of outliers, then membership and discretisation.
std::vector<PartitionClusters> ic_stage(const PipelineConfig& config, const Inputs& inputs,
                                        std::vector<PartitionClusters> clustered);

std::unique_ptr<kpg::Generator> make_generator(const PipelineConfig& config);
std::vector<kpg::KeyPointSet> generate_stage(const PipelineConfig& config, const Inputs& inputs,
                                             const std::vector<PartitionClusters>& clusters,
                                             const kpg::Generator& generator);

struct PartitionEval {
  std::string topic;
  corpus::Stance stance = corpus::Stance::kPro;
  std::size_t candidates = 0;
  std::size_t references = 0;
  eval::RougeScores rouge;
  std::optional<eval::SoftScores> soft;
  std::optional<double> optimal_match_total;  // only when counts agree
};

struct Report {
  std::vector<PartitionEval> per_partition;
  eval::RougeScores rouge;  // unweighted mean over partitions
  std::optional<eval::SoftScores> soft;
  std::string scorer_name;
  std::optional<eval::ScoreRange> scorer_range;
};

using ReferenceLookup =
    std::function<std::vector<std::string>(const std::string& topic, corpus::Stance stance)>;

Report evaluate(const std::vector<kpg::KeyPointSet>& candidates, const ReferenceLookup& references,
                const eval::PairScorer* scorer);

std::unique_ptr<eval::PairScorer> make_scorer(const PipelineConfig& config,
                                              std::shared_ptr<const embedding::Encoder> encoder);

// File formats. Each JSONL file starts with a {"_manifest": ...} line.
std::string clusters_to_jsonl(const std::vector<PartitionClusters>& clusters,
                              const std::string& config_hash);
std::vector<PartitionClusters> clusters_from_jsonl(const std::filesystem::path& path,
                                                   const corpus::Corpus& corpus);
std::string keypoints_to_jsonl(const std::vector<kpg::KeyPointSet>& sets,
                               const std::string& config_hash);
std::vector<kpg::KeyPointSet> keypoints_from_jsonl(const std::filesystem::path& path);
nlohmann::ordered_json report_to_json(const Report& report, const PipelineConfig& config);

struct RunSummary {
  std::size_t partitions = 0;
  std::size_t clusters = 0;
  std::size_t key_points = 0;
  std::optional<Report> report;
  std::vector<std::pair<std::string, double>> stage_ms;
  std::vector<std::filesystem::path> outputs;
};

// Full run; writes clusters.jsonl, keypoints.jsonl, report.json (when the
// corpus has reference key points) and run_manifest.json to out_dir. Files
// are written as "*.partial" and renamed only when every stage succeeded.
RunSummary run_pipeline(const PipelineConfig& config);

struct LambdaRange {
  double start = 0.0;
  double stop = 0.0;
  double step = 0.0;
  std::vector<double> values() const;  // throws UsageError("empty sweep")
};
LambdaRange parse_lambda_range(const std::string& text);

struct SweepRow {
  double lambda = 0.0;
  std::size_t clusters = 0;
  std::size_t key_points = 0;
  std::optional<Report> report;  // absent without reference key points
};

// One clustering pass, then iterative clustering, generation and
// evaluation for each lambda. Writes sweep.jsonl to out_dir.
std::vector<SweepRow> run_sweep(const PipelineConfig& config, const LambdaRange& range);

// Runs `fn`, prefixing any error with the stage name and keeping its kind;
// foreign exceptions become StageError.
void run_stage(const std::string& stage, const std::function<void()>& fn);

}  // namespace kpa::pipeline

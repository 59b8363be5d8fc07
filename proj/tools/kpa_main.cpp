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

// Command-line front end: `kpa <subcommand> [flags]`.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kpa/augment.hpp"
#include "kpa/bridge.hpp"
#include "kpa/corpus.hpp"
#include "kpa/error.hpp"
#include "kpa/eval.hpp"
#include "kpa/io.hpp"
#include "kpa/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using kpa::pipeline::PipelineConfig;

// Flag values as given, keyed by setting name; merged over --config.
struct Settings {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::string> flags;  // boolean flags that were set

  nlohmann::json merged(const std::vector<std::string>& allowed) const {
    nlohmann::json s = nlohmann::json::object();
    if (!config_file.empty()) {
      nlohmann::json file = nlohmann::json::parse(kpa::io::read_file(config_file), nullptr, false);
      if (!file.is_object()) throw kpa::UsageError("config file " + config_file + " is not a JSON object");
      for (const auto& [k, v] : file.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) != allowed.end()) s[k] = v;
      }
    }
    for (const auto& [k, v] : values) s[k] = v;
    for (const auto& k : flags) s[k] = true;
    return s;
  }

  PipelineConfig config() const {
    return kpa::pipeline::config_from_settings(merged(kpa::pipeline::setting_names()));
  }
};

void add_option(CLI::App* app, Settings& s, const std::string& name, const std::string& help) {
  app->add_option_function<std::string>(
      "--" + name, [&s, name](const std::string& v) { s.values[name] = v; }, help);
}

void add_flag(CLI::App* app, Settings& s, const std::string& name, const std::string& help) {
  app->add_flag_function(
      "--" + name, [&s, name](std::int64_t) { s.flags.push_back(name); }, help);
}

void add_config(CLI::App* app, Settings& s) {
  app->add_option("--config", s.config_file, "JSON config; keys mirror flag names, flags win");
}

void add_corpus_options(CLI::App* app, Settings& s) {
  add_option(app, s, "arguments", "argument file (CSV or JSONL)");
  add_option(app, s, "key-points", "reference key-point file");
  add_option(app, s, "labels", "match-label file");
  add_option(app, s, "format", "csv or jsonl (default: by extension)");
}

void add_embedding_options(CLI::App* app, Settings& s) {
  add_option(app, s, "embeddings", "JSONL {id, vector} file");
  add_option(app, s, "embed-endpoint", "bridge URL used for embeddings");
  add_option(app, s, "reduced-embeddings", "precomputed reduced vectors");
  add_option(app, s, "reducer", "pca or identity");
  add_option(app, s, "target-dim", "reduced dimension (pca default 5)");
  add_option(app, s, "seed", "random seed");
  add_option(app, s, "jobs", "partitions processed concurrently");
  add_option(app, s, "out", "output directory");
}

void add_cluster_options(CLI::App* app, Settings& s) {
  add_option(app, s, "kpm", "hdbscan or kmeans");
  add_option(app, s, "min-cluster-size", "hdbscan minimum cluster size");
  add_option(app, s, "k", "kmeans cluster count");
  add_option(app, s, "temperature", "membership softmax temperature");
}

void add_ic_options(CLI::App* app, Settings& s) {
  add_option(app, s, "lambda", "iterative clustering join threshold");
  add_option(app, s, "anchor", "centroid or mean-pairwise");
  add_option(app, s, "kernel", "cosine or dot");
}

void add_generate_options(CLI::App* app, Settings& s) {
  add_option(app, s, "backend", "extractive or remote");
  add_option(app, s, "endpoint", "bridge URL for generation and remote scoring");
  add_option(app, s, "max-new-tokens", "remote generation length limit");
  add_option(app, s, "budget", "prompt character budget");
  add_option(app, s, "max-kps", "key points per partition without references");
  add_flag(app, s, "allow-fallback", "fall back to extractive output on backend errors");
  add_option(app, s, "dedup-threshold", "cosine threshold for merging key points");
}

void add_scorer_options(CLI::App* app, Settings& s) {
  add_option(app, s, "scorer", "cosine, remote or rouge1");
  add_option(app, s, "metric", "metric name for the remote scorer");
}

void add_all_pipeline_options(CLI::App* app, Settings& s) {
  add_config(app, s);
  add_corpus_options(app, s);
  add_embedding_options(app, s);
  add_cluster_options(app, s);
  add_ic_options(app, s);
  add_generate_options(app, s);
  add_scorer_options(app, s);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw kpa::InputError("cannot create " + dir.generic_string() + ": " + ec.message());
}

void write_file(const fs::path& path, const std::string& content) {
  kpa::io::AtomicWriter w(path);
  w.write(content);
  w.commit();
}

void print_report(const kpa::pipeline::Report& r) {
  std::printf("rouge1=%.4f rouge2=%.4f rougeL=%.4f", r.rouge.r1, r.rouge.r2, r.rouge.rl);
  if (r.soft) std::printf(" sP=%.4f sR=%.4f sF1=%.4f", r.soft->precision, r.soft->recall, r.soft->f1);
  std::printf("\n");
}

int cmd_run(const Settings& s) {
  const PipelineConfig config = s.config();
  const auto summary = kpa::pipeline::run_pipeline(config);
  std::printf("partitions=%zu clusters=%zu key_points=%zu\n", summary.partitions, summary.clusters,
              summary.key_points);
  if (summary.report) print_report(*summary.report);
  for (const auto& p : summary.outputs) std::printf("wrote %s\n", p.generic_string().c_str());
  return 0;
}

int cmd_cluster(const Settings& s) {
  const PipelineConfig config = s.config();
  const auto inputs = kpa::pipeline::load_inputs(config);
  const auto clusters = kpa::pipeline::cluster_stage(config, inputs);
  ensure_dir(config.out_dir);
  write_file(config.out_dir / "clusters.jsonl", kpa::pipeline::clusters_to_jsonl(clusters, config.hash()));
  std::printf("wrote %s\n", (config.out_dir / "clusters.jsonl").generic_string().c_str());
  return 0;
}

int cmd_ic(const Settings& s, const std::string& clusters_path) {
  const PipelineConfig config = s.config();
  const auto inputs = kpa::pipeline::load_inputs(config);
  std::vector<kpa::pipeline::PartitionClusters> clusters;
  kpa::pipeline::run_stage("load", [&] {
    clusters = kpa::pipeline::clusters_from_jsonl(clusters_path, inputs.corpus);
  });
  clusters = kpa::pipeline::ic_stage(config, inputs, std::move(clusters));
  ensure_dir(config.out_dir);
  write_file(config.out_dir / "clusters.jsonl", kpa::pipeline::clusters_to_jsonl(clusters, config.hash()));
  std::printf("wrote %s\n", (config.out_dir / "clusters.jsonl").generic_string().c_str());
  return 0;
}

int cmd_generate(const Settings& s, const std::string& clusters_path) {
  const PipelineConfig config = s.config();
  const auto inputs = kpa::pipeline::load_inputs(config);
  std::vector<kpa::pipeline::PartitionClusters> clusters;
  kpa::pipeline::run_stage("load", [&] {
    clusters = kpa::pipeline::clusters_from_jsonl(clusters_path, inputs.corpus);
  });
  std::unique_ptr<kpa::kpg::Generator> generator;
  kpa::pipeline::run_stage("kpg", [&] { generator = kpa::pipeline::make_generator(config); });
  const auto sets = kpa::pipeline::generate_stage(config, inputs, clusters, *generator);
  ensure_dir(config.out_dir);
  write_file(config.out_dir / "keypoints.jsonl", kpa::pipeline::keypoints_to_jsonl(sets, config.hash()));
  std::printf("wrote %s\n", (config.out_dir / "keypoints.jsonl").generic_string().c_str());
  return 0;
}

// Candidates are either a keypoints.jsonl written by `generate`/`run` or a
// plain key-point file in the reference format.
std::vector<kpa::kpg::KeyPointSet> load_candidates(const fs::path& path) {
  if (kpa::corpus::format_from_extension(path) == kpa::corpus::FileFormat::kJsonl) {
    const auto lines = kpa::io::read_jsonl(path);
    if (!lines.empty() && lines.front().value.contains("text")) {
      return kpa::pipeline::keypoints_from_jsonl(path);
    }
  }
  std::vector<kpa::kpg::KeyPointSet> out;
  for (const auto& kp : kpa::corpus::load_key_points(path)) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& set) {
      return set.topic_id == kp.topic_id && set.stance == kp.stance;
    });
    if (it == out.end()) {
      out.push_back({kp.topic_id, kp.stance, {}});
      it = std::prev(out.end());
    }
    kpa::kpg::GeneratedKeyPoint g;
    g.text = kp.text;
    g.rank = static_cast<int>(it->key_points.size()) + 1;
    it->key_points.push_back(std::move(g));
  }
  return out;
}

int cmd_evaluate(const Settings& s, const std::string& candidates_path,
                 const std::string& references_path) {
  const PipelineConfig config = s.config();
  std::vector<kpa::kpg::KeyPointSet> candidates;
  std::vector<kpa::corpus::ReferenceKeyPoint> references;
  kpa::pipeline::run_stage("load", [&] {
    candidates = load_candidates(candidates_path);
    references = kpa::corpus::load_key_points(references_path, config.corpus.format);
  });
  std::shared_ptr<const kpa::embedding::Encoder> encoder;
  kpa::pipeline::run_stage("attach", [&] {
    if (config.scorer != kpa::pipeline::ScorerKind::kCosine) return;
    if (config.embeddings) {
      std::vector<kpa::corpus::Argument> args;
      if (!config.corpus.arguments.empty()) {
        kpa::corpus::CorpusPaths paths;
        paths.arguments = config.corpus.arguments;
        paths.format = config.corpus.format;
        args = kpa::corpus::load_corpus(paths).arguments();
      }
      const kpa::corpus::Corpus lookup(std::move(args), references, {});
      encoder = std::make_shared<kpa::embedding::StoreLookupEncoder>(
          lookup, kpa::embedding::load_embedding_file(*config.embeddings));
    } else {
      encoder = std::make_shared<kpa::bridge::BridgeEncoder>(
          kpa::bridge::BridgeClient(kpa::bridge::resolve_bridge_url(config.embed_endpoint)));
    }
  });
  kpa::pipeline::Report report;
  kpa::pipeline::run_stage("eval", [&] {
    const auto scorer = kpa::pipeline::make_scorer(config, encoder);
    const auto lookup = [&](const std::string& topic, kpa::corpus::Stance stance) {
      std::vector<std::string> out;
      for (const auto& r : references) {
        if (r.topic_id == topic && r.stance == stance) out.push_back(r.text);
      }
      return out;
    };
    report = kpa::pipeline::evaluate(candidates, lookup, scorer.get());
  });
  ensure_dir(config.out_dir);
  write_file(config.out_dir / "report.json",
             kpa::pipeline::report_to_json(report, config).dump(2) + "\n");
  print_report(report);
  std::printf("wrote %s\n", (config.out_dir / "report.json").generic_string().c_str());
  return 0;
}

int cmd_sweep(const Settings& s, const std::string& range_text) {
  const PipelineConfig config = s.config();
  const auto range = kpa::pipeline::parse_lambda_range(range_text);
  const auto rows = kpa::pipeline::run_sweep(config, range);
  std::printf("%-8s %-9s %-11s %-8s %-8s %-8s %-8s\n", "lambda", "clusters", "key_points", "rouge1",
              "rouge2", "rougeL", "sF1");
  for (const auto& row : rows) {
    std::printf("%-8.3f %-9zu %-11zu", row.lambda, row.clusters, row.key_points);
    if (row.report) {
      std::printf(" %-8.4f %-8.4f %-8.4f", row.report->rouge.r1, row.report->rouge.r2,
                  row.report->rouge.rl);
      if (row.report->soft) std::printf(" %-8.4f", row.report->soft->f1);
    }
    std::printf("\n");
  }
  std::printf("wrote %s\n", (config.out_dir / "sweep.jsonl").generic_string().c_str());
  return 0;
}

int cmd_filter(const Settings& s, const std::string& input, const std::string& output,
               double drop_fraction, bool per_topic) {
  const nlohmann::json merged = s.merged({"scorer", "metric", "endpoint", "embed-endpoint"});
  PipelineConfig config = kpa::pipeline::config_from_settings(merged);
  if (!merged.contains("scorer")) config.scorer = kpa::pipeline::ScorerKind::kRouge1;
  std::vector<kpa::augment::AugmentedPair> pairs;
  kpa::pipeline::run_stage("load", [&] { pairs = kpa::augment::load_pairs(input); });
  std::vector<kpa::augment::AugmentedPair> kept;
  kpa::pipeline::run_stage("filter", [&] {
    std::shared_ptr<const kpa::embedding::Encoder> encoder;
    if (config.scorer == kpa::pipeline::ScorerKind::kCosine) {
      encoder = std::make_shared<kpa::bridge::BridgeEncoder>(
          kpa::bridge::BridgeClient(kpa::bridge::resolve_bridge_url(config.embed_endpoint)));
    }
    const auto scorer = kpa::pipeline::make_scorer(config, encoder);
    kept = kpa::augment::quality_filter(std::move(pairs), *scorer, drop_fraction, per_topic);
  });
  const fs::path out(output);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_file(out, kpa::augment::to_jsonl(kept));
  std::printf("kept %zu pairs, wrote %s\n", kept.size(), out.generic_string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Key point analysis toolkit"};
  app.require_subcommand(1);

  Settings run_s, cluster_s, ic_s, gen_s, eval_s, sweep_s, filter_s;
  std::string clusters_ic, clusters_gen, candidates, references, lambda_range, input, output;
  double drop_fraction = 0.25;
  bool per_topic = false;

  auto* run = app.add_subcommand("run", "full pipeline");
  add_all_pipeline_options(run, run_s);

  auto* cluster = app.add_subcommand("cluster", "density clustering per partition");
  add_all_pipeline_options(cluster, cluster_s);

  auto* ic = app.add_subcommand("ic", "iterative clustering of outliers");
  add_all_pipeline_options(ic, ic_s);
  ic->add_option("--clusters", clusters_ic, "clusters.jsonl from `cluster`")->required();

  auto* gen = app.add_subcommand("generate", "key-point generation from clusters");
  add_all_pipeline_options(gen, gen_s);
  gen->add_option("--clusters", clusters_gen, "clusters.jsonl from `ic`")->required();

  auto* ev = app.add_subcommand("evaluate", "score candidates against references");
  add_config(ev, eval_s);
  add_option(ev, eval_s, "arguments", "argument file, for looking up candidate embeddings");
  add_option(ev, eval_s, "format", "csv or jsonl (default: by extension)");
  add_option(ev, eval_s, "embeddings", "JSONL {id, vector} file");
  add_option(ev, eval_s, "embed-endpoint", "bridge URL used for embeddings");
  add_option(ev, eval_s, "endpoint", "bridge URL for remote scoring");
  add_option(ev, eval_s, "out", "output directory");
  add_scorer_options(ev, eval_s);
  ev->add_option("--candidates", candidates, "keypoints.jsonl or key-point file")->required();
  ev->add_option("--references", references, "reference key-point file")->required();

  auto* sweep = app.add_subcommand("sweep", "lambda sweep");
  add_all_pipeline_options(sweep, sweep_s);
  sweep->add_option("--lambda-range", lambda_range, "start:stop:step")->required();

  auto* filter = app.add_subcommand("filter-augment", "drop the lowest-scoring augmented pairs");
  add_config(filter, filter_s);
  add_scorer_options(filter, filter_s);
  add_option(filter, filter_s, "endpoint", "bridge URL for remote scoring");
  add_option(filter, filter_s, "embed-endpoint", "bridge URL for the cosine scorer");
  filter->add_option("--input", input, "JSONL {id, original, generated}")->required();
  filter->add_option("--output", output, "retained pairs")->required();
  filter->add_option("--drop-fraction", drop_fraction, "fraction removed (default 0.25)");
  filter->add_flag("--per-topic", per_topic, "apply the cut within each topic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(kpa::ErrorKind::kUsage);
  }

  try {
    if (*run) return cmd_run(run_s);
    if (*cluster) return cmd_cluster(cluster_s);
    if (*ic) return cmd_ic(ic_s, clusters_ic);
    if (*gen) return cmd_generate(gen_s, clusters_gen);
    if (*ev) return cmd_evaluate(eval_s, candidates, references);
    if (*sweep) return cmd_sweep(sweep_s, lambda_range);
    if (*filter) return cmd_filter(filter_s, input, output, drop_fraction, per_topic);
  } catch (const kpa::Error& e) {
    std::fprintf(stderr, "kpa: error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kpa: error: %s\n", e.what());
    return static_cast<int>(kpa::ErrorKind::kStage);
  }
  return 0;
}

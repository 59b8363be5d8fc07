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

#include "kpa/pipeline.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <set>
#include <sstream>
#include <thread>

#include "kpa/bridge.hpp"
#include "kpa/error.hpp"
#include "kpa/io.hpp"

namespace kpa::pipeline {
namespace {

// Stored vectors where known, the bridge for everything else.
class StoreThenBridgeEncoder : public embedding::Encoder {
 public:
  StoreThenBridgeEncoder(std::shared_ptr<const embedding::StoreLookupEncoder> store,
                         bridge::BridgeEncoder bridge)
      : store_(std::move(store)), bridge_(std::move(bridge)) {}

  std::vector<embedding::Vector> embed(const std::vector<std::string>& texts) const override {
    std::vector<std::optional<embedding::Vector>> found(texts.size());
    std::vector<std::string> unknown;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (const auto* v = store_->find(texts[i])) {
        found[i] = *v;
      } else {
        unknown.push_back(texts[i]);
      }
    }
    std::vector<embedding::Vector> fetched = bridge_.embed(unknown);
    std::vector<embedding::Vector> out;
    out.reserve(texts.size());
    std::size_t next = 0;
    for (auto& f : found) out.push_back(f ? std::move(*f) : std::move(fetched[next++]));
    return out;
  }

 private:
  std::shared_ptr<const embedding::StoreLookupEncoder> store_;
  bridge::BridgeEncoder bridge_;
};

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void throw_kind(ErrorKind kind, const std::string& message) {
  switch (kind) {
    case ErrorKind::kUsage: throw UsageError(message);
    case ErrorKind::kInput: throw InputError(message);
    case ErrorKind::kBackend: throw BackendError(message);
    case ErrorKind::kStage: break;
  }
  throw StageError(message);
}

std::string partition_label(const corpus::Partition& p) {
  return "(" + p.topic_id + ", " + std::string(corpus::stance_name(p.stance)) + ")";
}

template <class Fn>
void in_partition(const corpus::Partition& p, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    throw_kind(e.kind(), "partition " + partition_label(p) + ": " + e.what());
  }
}

// Runs fn(0..n-1) on up to `jobs` threads; the error of the lowest index wins.
template <class Fn>
void for_each_index(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const std::size_t count = std::min(jobs, n);
  for (std::size_t w = 0; w < count; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string format_name(corpus::FileFormat f) {
  return f == corpus::FileFormat::kCsv ? "csv" : "jsonl";
}
std::string kernel_name(embedding::Kernel k) {
  return k == embedding::Kernel::kCosine ? "cosine" : "dot";
}
std::string reducer_name(reduction::Method m) {
  return m == reduction::Method::kPca ? "pca" : "identity";
}
std::string backend_name(BackendKind b) {
  return b == BackendKind::kExtractive ? "extractive" : "remote";
}
std::string scorer_name(ScorerKind s) {
  switch (s) {
    case ScorerKind::kCosine: return "cosine";
    case ScorerKind::kRemote: return "remote";
    case ScorerKind::kRouge1: return "rouge1";
  }
  return "cosine";
}

ordered_json optional_path(const std::optional<std::filesystem::path>& p) {
  return p ? ordered_json(p->generic_string()) : ordered_json(nullptr);
}

// Settings values may arrive typed (config file) or as strings (flags).
std::string as_string(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  throw UsageError("setting '" + key + "' must be a string");
}

double as_double(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size() && std::isfinite(d)) return d;
  }
  throw UsageError("setting '" + key + "' must be a number, got " + v.dump());
}

std::uint64_t as_unsigned(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      try {
        return std::stoull(s);
      } catch (const std::exception&) {
      }
    }
  }
  throw UsageError("setting '" + key + "' must be a non-negative integer, got " + v.dump());
}

bool as_bool(const json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
  }
  throw UsageError("setting '" + key + "' must be a boolean, got " + v.dump());
}

std::optional<std::filesystem::path> as_optional_path(const json& v, const std::string& key) {
  if (v.is_null()) return std::nullopt;
  const std::string s = as_string(v, key);
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

embedding::EmbeddingStore reduced_for(const PipelineConfig& config, const Inputs& inputs,
                                      const corpus::Partition& partition) {
  if (inputs.reduced) return inputs.reduced->subset(partition.arg_ids);
  const embedding::EmbeddingStore sub = inputs.embeddings.subset(partition.arg_ids);
  reduction::ReducerConfig rc = config.reducer;
  rc.seed = config.seed;
  if (rc.method == reduction::Method::kPca && !rc.target_dim) {
    rc.target_dim = std::min({reduction::kDefaultPcaDim, sub.dim(), sub.size()});
  }
  return reduction::reduce(sub, rc);
}

std::map<std::string, std::string, std::less<>> argument_texts(const corpus::Corpus& corpus) {
  std::map<std::string, std::string, std::less<>> out;
  for (const auto& a : corpus.arguments()) out.emplace(a.id, a.text);
  return out;
}

ordered_json rouge_json(const eval::RougeScores& r) {
  ordered_json j;
  j["rouge1"] = r.r1;
  j["rouge2"] = r.r2;
  j["rougeL"] = r.rl;
  return j;
}

ordered_json soft_json(const std::optional<eval::SoftScores>& s) {
  if (!s) return nullptr;
  ordered_json j;
  j["sP"] = s->precision;
  j["sR"] = s->recall;
  j["sF1"] = s->f1;
  return j;
}

ordered_json manifest_line(const std::string& kind, const std::string& hash,
                           const std::string& stage = {}) {
  ordered_json m;
  m["kind"] = kind;
  if (!stage.empty()) m["stage"] = stage;
  m["config_hash"] = hash;
  ordered_json line;
  line["_manifest"] = m;
  return line;
}

std::vector<std::string> json_strings(const json& v, const std::string& what) {
  if (!v.is_array()) throw InputError(what + " must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw InputError(what + " must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

corpus::Stance json_stance(const json& rec, const std::string& where) {
  if (!rec.contains("stance")) throw InputError(where + ": missing field 'stance'");
  return corpus::parse_stance(as_string(rec.at("stance"), "stance"));
}

std::string json_field(const json& rec, const char* name, const std::string& where) {
  if (!rec.contains(name) || !rec.at(name).is_string()) {
    throw InputError(where + ": missing string field '" + name + "'");
  }
  return rec.at(name).get<std::string>();
}

}  // namespace

void run_stage(const std::string& stage, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    throw_kind(e.kind(), "stage '" + stage + "': " + e.what());
  } catch (const std::exception& e) {
    throw StageError("stage '" + stage + "': " + e.what());
  }
}

// ---------------------------------------------------------------- config

const std::vector<std::string>& setting_names() {
  static const std::vector<std::string> names = {
      "arguments", "key-points", "labels", "format", "embeddings", "embed-endpoint",
      "reduced-embeddings", "reducer", "target-dim", "seed", "kpm", "min-cluster-size", "k",
      "temperature", "lambda", "anchor", "kernel", "damping", "textrank-tolerance",
      "textrank-max-iterations", "backend", "endpoint", "max-new-tokens", "budget", "max-kps",
      "allow-fallback", "dedup-threshold", "scorer", "metric", "out", "jobs"};
  return names;
}

ordered_json PipelineConfig::echo() const {
  ordered_json j;
  j["arguments"] = corpus.arguments.generic_string();
  j["key-points"] = optional_path(corpus.key_points);
  j["labels"] = optional_path(corpus.labels);
  j["format"] = corpus.format ? ordered_json(format_name(*corpus.format)) : ordered_json(nullptr);
  j["embeddings"] = optional_path(embeddings);
  j["embed-endpoint"] = embed_endpoint;
  j["reduced-embeddings"] = optional_path(reduced_embeddings);
  j["reducer"] = reducer_name(reducer.method);
  j["target-dim"] = reducer.target_dim ? ordered_json(*reducer.target_dim) : ordered_json(nullptr);
  j["seed"] = seed;
  j["kpm"] = std::string(kpm::method_name(kpm.method));
  j["min-cluster-size"] = kpm.min_cluster_size;
  j["k"] = kpm.k;
  j["temperature"] = kpm.temperature;
  j["lambda"] = ic.lambda;
  j["anchor"] = std::string(ic::anchor_mode_name(ic.anchor_mode));
  j["kernel"] = kernel_name(ic.kernel);
  j["damping"] = textrank.damping;
  j["textrank-tolerance"] = textrank.tolerance;
  j["textrank-max-iterations"] = textrank.max_iterations;
  j["backend"] = backend_name(backend);
  j["endpoint"] = endpoint;
  j["max-new-tokens"] = max_new_tokens;
  j["budget"] = budget;
  j["max-kps"] = max_kps;
  j["allow-fallback"] = allow_fallback;
  j["dedup-threshold"] = dedup_threshold;
  j["scorer"] = scorer_name(scorer);
  j["metric"] = metric;
  return j;
}

std::string PipelineConfig::hash() const { return fnv1a_hex(echo().dump()); }

PipelineConfig config_from_settings(const json& settings) {
  if (!settings.is_object()) throw UsageError("config must be a JSON object");
  const auto& names = setting_names();
  PipelineConfig c;
  for (const auto& [key, v] : settings.items()) {
    if (std::find(names.begin(), names.end(), key) == names.end()) {
      throw UsageError("unknown config key '" + key + "'");
    }
    if (key == "arguments") {
      c.corpus.arguments = as_string(v, key);
    } else if (key == "key-points") {
      c.corpus.key_points = as_optional_path(v, key);
    } else if (key == "labels") {
      c.corpus.labels = as_optional_path(v, key);
    } else if (key == "format") {
      if (v.is_null()) {
        c.corpus.format.reset();
      } else {
        c.corpus.format = corpus::parse_format(as_string(v, key));
      }
    } else if (key == "embeddings") {
      c.embeddings = as_optional_path(v, key);
    } else if (key == "embed-endpoint") {
      c.embed_endpoint = v.is_null() ? "" : as_string(v, key);
    } else if (key == "reduced-embeddings") {
      c.reduced_embeddings = as_optional_path(v, key);
    } else if (key == "reducer") {
      c.reducer.method = reduction::parse_method(as_string(v, key));
    } else if (key == "target-dim") {
      if (v.is_null()) {
        c.reducer.target_dim.reset();
      } else {
        c.reducer.target_dim = as_unsigned(v, key);
      }
    } else if (key == "seed") {
      c.seed = as_unsigned(v, key);
    } else if (key == "kpm") {
      c.kpm.method = kpm::parse_method(as_string(v, key));
    } else if (key == "min-cluster-size") {
      c.kpm.min_cluster_size = as_unsigned(v, key);
    } else if (key == "k") {
      c.kpm.k = as_unsigned(v, key);
    } else if (key == "temperature") {
      c.kpm.temperature = as_double(v, key);
    } else if (key == "lambda") {
      c.ic.lambda = as_double(v, key);
    } else if (key == "anchor") {
      c.ic.anchor_mode = ic::parse_anchor_mode(as_string(v, key));
    } else if (key == "kernel") {
      c.ic.kernel = embedding::parse_kernel(as_string(v, key));
    } else if (key == "damping") {
      c.textrank.damping = as_double(v, key);
    } else if (key == "textrank-tolerance") {
      c.textrank.tolerance = as_double(v, key);
    } else if (key == "textrank-max-iterations") {
      c.textrank.max_iterations = static_cast<int>(as_unsigned(v, key));
    } else if (key == "backend") {
      const std::string b = as_string(v, key);
      if (b == "extractive") {
        c.backend = BackendKind::kExtractive;
      } else if (b == "remote") {
        c.backend = BackendKind::kRemote;
      } else {
        throw UsageError("unknown backend '" + b + "' (expected extractive or remote)");
      }
    } else if (key == "endpoint") {
      c.endpoint = v.is_null() ? "" : as_string(v, key);
    } else if (key == "max-new-tokens") {
      c.max_new_tokens = static_cast<int>(as_unsigned(v, key));
    } else if (key == "budget") {
      c.budget = as_unsigned(v, key);
    } else if (key == "max-kps") {
      c.max_kps = as_unsigned(v, key);
    } else if (key == "allow-fallback") {
      c.allow_fallback = as_bool(v, key);
    } else if (key == "dedup-threshold") {
      c.dedup_threshold = as_double(v, key);
    } else if (key == "scorer") {
      const std::string s = as_string(v, key);
      if (s == "cosine") {
        c.scorer = ScorerKind::kCosine;
      } else if (s == "remote") {
        c.scorer = ScorerKind::kRemote;
      } else if (s == "rouge1") {
        c.scorer = ScorerKind::kRouge1;
      } else {
        throw UsageError("unknown scorer '" + s + "' (expected cosine, remote or rouge1)");
      }
    } else if (key == "metric") {
      c.metric = as_string(v, key);
    } else if (key == "out") {
      c.out_dir = as_string(v, key);
    } else if (key == "jobs") {
      c.jobs = as_unsigned(v, key);
    }
  }
  c.kpm.seed = c.seed;
  c.reducer.seed = c.seed;
  c.kpm.validate();
  c.ic.validate();
  c.textrank.validate();
  if (c.jobs < 1) throw UsageError("jobs must be >= 1");
  if (c.max_kps < 1) throw UsageError("max-kps must be >= 1");
  if (c.max_new_tokens < 1) throw UsageError("max-new-tokens must be >= 1");
  if (!(c.dedup_threshold >= -1.0 && c.dedup_threshold <= 1.0)) {
    throw UsageError("dedup-threshold must lie in [-1, 1]");
  }
  return c;
}

// ---------------------------------------------------------------- stages

Inputs load_inputs(const PipelineConfig& config) {
  Inputs in;
  run_stage("load", [&] {
    if (config.corpus.arguments.empty()) throw UsageError("no argument file given");
    in.corpus = corpus::load_corpus(config.corpus);
  });
  run_stage("attach", [&] {
    if (config.embeddings) {
      const embedding::EmbeddingStore full = embedding::load_embedding_file(*config.embeddings);
      in.embeddings = embedding::attach_embeddings(in.corpus, full);
      auto lookup = std::make_shared<embedding::StoreLookupEncoder>(in.corpus, full);
      if (config.embed_endpoint.empty()) {
        in.encoder = lookup;
      } else {
        in.encoder = std::make_shared<StoreThenBridgeEncoder>(
            lookup, bridge::BridgeEncoder(bridge::BridgeClient(config.embed_endpoint)));
      }
    } else {
      if (config.embed_endpoint.empty() && std::getenv("KPA_BRIDGE_URL") == nullptr) {
        throw UsageError("no embedding source: pass --embeddings or --embed-endpoint");
      }
      auto encoder = std::make_shared<bridge::BridgeEncoder>(
          bridge::BridgeClient(bridge::resolve_bridge_url(config.embed_endpoint)));
      in.embeddings = embedding::attach_embeddings(in.corpus, *encoder);
      in.encoder = encoder;
    }
    if (config.reduced_embeddings) {
      in.reduced = embedding::attach_embeddings(
          in.corpus, embedding::load_embedding_file(*config.reduced_embeddings));
    }
  });
  return in;
}

std::vector<PartitionClusters> cluster_stage(const PipelineConfig& config, const Inputs& inputs) {
  const std::vector<corpus::Partition> parts = corpus::partition_corpus(inputs.corpus);
  std::vector<PartitionClusters> out(parts.size());
  run_stage("kpm", [&] {
    kpm::KpmConfig kc = config.kpm;
    kc.seed = config.seed;
    for_each_index(parts.size(), config.jobs, [&](std::size_t i) {
      in_partition(parts[i], [&] {
        const embedding::EmbeddingStore reduced = reduced_for(config, inputs, parts[i]);
        out[i].partition = parts[i];
        out[i].clusters = kpm::cluster(reduced, parts[i], kc);
        out[i].stage = "kpm";
      });
    });
  });
  return out;
}

std::vector<PartitionClusters> ic_stage(const PipelineConfig& config, const Inputs& inputs,
                                        std::vector<PartitionClusters> clustered) {
  run_stage("ic", [&] {
    config.ic.validate();
    for_each_index(clustered.size(), config.jobs, [&](std::size_t i) {
      PartitionClusters& pc = clustered[i];
      in_partition(pc.partition, [&] {
        if (pc.stage != "kpm") throw UsageError("clusters have already been through ic");
        pc.clusters = ic::iterative_assign(pc.clusters, inputs.embeddings, config.ic);
        const embedding::EmbeddingStore reduced = reduced_for(config, inputs, pc.partition);
        const auto vectors = kpm::membership(reduced, pc.clusters, config.kpm.temperature);
        const double gamma = kpm::compute_gamma(vectors);
        const kpm::DiscretizedAssignment assigned = kpm::discretize(vectors, gamma, pc.clusters);
        pc.secondary.clear();
        for (const std::string& id : pc.partition.arg_ids) {
          const auto it = assigned.find(id);
          if (it == assigned.end()) continue;
          for (const int c : it->second) {
            const kpm::Cluster* cl = pc.clusters.find(c);
            if (std::find(cl->members.begin(), cl->members.end(), id) == cl->members.end()) {
              pc.secondary[c].push_back(id);
            }
          }
        }
        pc.stage = "ic";
      });
    });
  });
  return clustered;
}

std::unique_ptr<kpg::Generator> make_generator(const PipelineConfig& config) {
  if (config.backend == BackendKind::kExtractive) return std::make_unique<kpg::ExtractiveGenerator>();
  auto remote = std::make_unique<kpg::RemoteGenerator>(
      bridge::BridgeClient(bridge::resolve_bridge_url(config.endpoint)), config.max_new_tokens);
  if (config.allow_fallback) return std::make_unique<kpg::FallbackGenerator>(std::move(remote));
  remote->health_check();
  return remote;
}

std::vector<kpg::KeyPointSet> generate_stage(const PipelineConfig& config, const Inputs& inputs,
                                             const std::vector<PartitionClusters>& clusters,
                                             const kpg::Generator& generator) {
  const auto texts = argument_texts(inputs.corpus);
  std::vector<kpg::KeyPointSet> out(clusters.size());
  run_stage("kpg", [&] {
    for_each_index(clusters.size(), config.jobs, [&](std::size_t i) {
      const PartitionClusters& pc = clusters[i];
      in_partition(pc.partition, [&] {
        const corpus::Topic* topic = inputs.corpus.find_topic(pc.partition.topic_id);
        if (topic == nullptr) throw InputError("unknown topic '" + pc.partition.topic_id + "'");
        std::vector<kpg::GeneratedKeyPoint> kps;
        for (const kpm::Cluster& c : pc.clusters.clusters) {
          std::vector<std::string> members = c.members;
          if (const auto it = pc.secondary.find(c.id); it != pc.secondary.end()) {
            members.insert(members.end(), it->second.begin(), it->second.end());
          }
          const std::vector<std::string> ordered =
              textrank::order_cluster(members, inputs.embeddings, config.textrank);
          std::vector<std::string> member_texts;
          for (const auto& id : ordered) member_texts.push_back(texts.at(id));
          kpg::ClusterInput input{
              kpg::assemble_prompt(pc.partition.stance, topic->text, member_texts, config.budget),
              member_texts, inputs.embeddings.gather(ordered)};
          kpg::GeneratedKeyPoint kp;
          kp.id = c.id;
          kp.text = generator.generate(input);
          kp.source_cluster_ids = {c.id};
          kp.effective_size = members.size();
          kps.push_back(std::move(kp));
        }
        std::size_t n = inputs.corpus.reference_kps_for(pc.partition.topic_id, pc.partition.stance).size();
        if (n == 0) n = config.max_kps;
        if (kps.empty()) {
          out[i] = kpg::rank_and_truncate(pc.partition.topic_id, pc.partition.stance, {}, n);
          return;
        }
        std::vector<std::string> kp_texts;
        for (const auto& kp : kps) kp_texts.push_back(kp.text);
        const std::vector<embedding::Vector> vecs = inputs.encoder->embed(kp_texts);
        std::vector<kpg::GeneratedKeyPoint> merged =
            kpg::dedup_merge(kps, vecs, config.dedup_threshold);
        std::vector<embedding::Vector> merged_vecs;
        for (const auto& m : merged) {
          const auto pos = std::find_if(kps.begin(), kps.end(),
                                        [&](const auto& kp) { return kp.id == m.id; });
          merged_vecs.push_back(vecs[static_cast<std::size_t>(pos - kps.begin())]);
        }
        const std::vector<double> centrality =
            textrank::textrank(textrank::SimilarityGraph::from_vectors(merged_vecs), config.textrank);
        for (std::size_t j = 0; j < merged.size(); ++j) merged[j].centrality = centrality[j];
        out[i] = kpg::rank_and_truncate(pc.partition.topic_id, pc.partition.stance,
                                        std::move(merged), n);
      });
    });
  });
  return out;
}

// ---------------------------------------------------------------- evaluation

std::unique_ptr<eval::PairScorer> make_scorer(const PipelineConfig& config,
                                              std::shared_ptr<const embedding::Encoder> encoder) {
  switch (config.scorer) {
    case ScorerKind::kCosine:
      if (!encoder) throw UsageError("cosine scorer needs embeddings");
      return std::make_unique<eval::CosineEmbeddingScorer>(std::move(encoder));
    case ScorerKind::kRouge1:
      return std::make_unique<eval::Rouge1Scorer>();
    case ScorerKind::kRemote:
      return std::make_unique<eval::RemoteScorer>(
          bridge::BridgeClient(bridge::resolve_bridge_url(config.endpoint)), config.metric);
  }
  throw UsageError("unknown scorer");
}

Report evaluate(const std::vector<kpg::KeyPointSet>& candidates, const ReferenceLookup& references,
                const eval::PairScorer* scorer) {
  Report report;
  std::vector<eval::PartitionTexts> all;
  std::vector<eval::SoftScores> softs;
  for (const kpg::KeyPointSet& set : candidates) {
    PartitionEval pe;
    pe.topic = set.topic_id;
    pe.stance = set.stance;
    eval::PartitionTexts texts;
    for (const auto& kp : set.key_points) texts.candidates.push_back(kp.text);
    texts.references = references(set.topic_id, set.stance);
    if (texts.references.empty()) {
      throw InputError("partition missing references: (" + set.topic_id + ", " +
                       std::string(corpus::stance_name(set.stance)) + ")");
    }
    pe.candidates = texts.candidates.size();
    pe.references = texts.references.size();
    pe.rouge = eval::corpus_rouge(std::span<const eval::PartitionTexts>(&texts, 1));
    if (scorer != nullptr && !texts.candidates.empty()) {
      const Matrix m = scorer->score_matrix(texts.candidates, texts.references);
      pe.soft = eval::soft_scores_from_matrix(m);
      softs.push_back(*pe.soft);
      if (m.rows() == m.cols()) pe.optimal_match_total = eval::optimal_match(m).total;
    }
    all.push_back(std::move(texts));
    report.per_partition.push_back(std::move(pe));
  }
  if (!all.empty()) report.rouge = eval::corpus_rouge(all);
  if (!softs.empty()) {
    eval::SoftScores mean;
    for (const auto& s : softs) {
      mean.precision += s.precision;
      mean.recall += s.recall;
      mean.f1 += s.f1;
    }
    const double n = static_cast<double>(softs.size());
    mean.precision /= n;
    mean.recall /= n;
    mean.f1 /= n;
    report.soft = mean;
  }
  if (scorer != nullptr) {
    report.scorer_name = scorer->name();
    report.scorer_range = scorer->declared_range();
  }
  return report;
}

ordered_json report_to_json(const Report& report, const PipelineConfig& config) {
  ordered_json j;
  j["_manifest"] = manifest_line("report", config.hash())["_manifest"];
  j["tokenization"] = "lowercase; split on maximal non-alphanumeric runs; no stemming";
  ordered_json sc;
  sc["name"] = report.scorer_name.empty() ? ordered_json(nullptr) : ordered_json(report.scorer_name);
  sc["declared_range"] = report.scorer_range
                             ? ordered_json::array({report.scorer_range->lo, report.scorer_range->hi})
                             : ordered_json(nullptr);
  j["scorer"] = sc;
  ordered_json parts = ordered_json::array();
  for (const auto& p : report.per_partition) {
    ordered_json e;
    e["topic"] = p.topic;
    e["stance"] = std::string(corpus::stance_name(p.stance));
    e["candidates"] = p.candidates;
    e["references"] = p.references;
    e["rouge"] = rouge_json(p.rouge);
    e["soft"] = soft_json(p.soft);
    e["optimal_match_total"] =
        p.optimal_match_total ? ordered_json(*p.optimal_match_total) : ordered_json(nullptr);
    parts.push_back(std::move(e));
  }
  j["per_partition"] = std::move(parts);
  ordered_json avg;
  avg["rouge"] = rouge_json(report.rouge);
  avg["soft"] = soft_json(report.soft);
  j["averages"] = std::move(avg);
  j["config_echo"] = config.echo();
  return j;
}

// ---------------------------------------------------------------- file formats

std::string clusters_to_jsonl(const std::vector<PartitionClusters>& clusters,
                              const std::string& config_hash) {
  std::string stage = clusters.empty() ? "kpm" : clusters.front().stage;
  std::string out = manifest_line("clusters", config_hash, stage).dump() + "\n";
  for (const PartitionClusters& pc : clusters) {
    const std::string stance(corpus::stance_name(pc.partition.stance));
    for (const kpm::Cluster& c : pc.clusters.clusters) {
      ordered_json rec;
      rec["cluster_id"] = c.id;
      rec["topic"] = pc.partition.topic_id;
      rec["stance"] = stance;
      rec["members"] = c.members;
      const auto it = pc.secondary.find(c.id);
      rec["secondary_members"] =
          it == pc.secondary.end() ? std::vector<std::string>{} : it->second;
      out += rec.dump() + "\n";
    }
    if (!pc.clusters.outliers.empty()) {
      ordered_json rec;
      rec["cluster_id"] = -1;
      rec["topic"] = pc.partition.topic_id;
      rec["stance"] = stance;
      rec["members"] = pc.clusters.outliers;
      out += rec.dump() + "\n";
    }
  }
  return out;
}

std::vector<PartitionClusters> clusters_from_jsonl(const std::filesystem::path& path,
                                                   const corpus::Corpus& corpus) {
  std::string stage = "kpm";
  {
    std::istringstream lines(io::read_file(path));
    std::string first;
    while (std::getline(lines, first) && io::trim(first).empty()) {
    }
    const json head = json::parse(first, nullptr, false);
    if (!head.is_object() || !head.contains("_manifest")) {
      throw InputError(path.generic_string() + ": missing manifest line");
    }
    stage = head["_manifest"].value("stage", "kpm");
    if (stage != "kpm" && stage != "ic") {
      throw InputError(path.generic_string() + ": unknown clusters stage '" + stage + "'");
    }
  }
  std::vector<PartitionClusters> out;
  for (const corpus::Partition& p : corpus::partition_corpus(corpus)) {
    PartitionClusters pc;
    pc.partition = p;
    pc.stage = stage;
    out.push_back(std::move(pc));
  }
  std::vector<bool> seen(out.size(), false);
  for (const io::JsonLine& line : io::read_jsonl(path)) {
    const std::string where = path.generic_string() + ":" + std::to_string(line.line);
    const json& rec = line.value;
    const std::string topic = json_field(rec, "topic", where);
    const corpus::Stance stance = json_stance(rec, where);
    const auto it = std::find_if(out.begin(), out.end(), [&](const PartitionClusters& pc) {
      return pc.partition.topic_id == topic && pc.partition.stance == stance;
    });
    if (it == out.end()) {
      throw InputError(where + ": unknown partition (" + topic + ", " +
                       std::string(corpus::stance_name(stance)) + ")");
    }
    seen[static_cast<std::size_t>(it - out.begin())] = true;
    if (!rec.contains("cluster_id") || !rec["cluster_id"].is_number_integer()) {
      throw InputError(where + ": missing integer field 'cluster_id'");
    }
    const int id = rec["cluster_id"].get<int>();
    if (!rec.contains("members")) throw InputError(where + ": missing field 'members'");
    std::vector<std::string> members = json_strings(rec["members"], where + ": members");
    for (const auto& m : members) {
      const corpus::Argument* a = corpus.find_argument(m);
      if (a == nullptr || a->topic_id != topic || a->stance != stance) {
        throw InputError(where + ": argument '" + m + "' is not in this partition");
      }
    }
    if (id == -1) {
      it->clusters.outliers.insert(it->clusters.outliers.end(), members.begin(), members.end());
      continue;
    }
    if (id < 0) throw InputError(where + ": negative cluster id");
    it->clusters.clusters.push_back({id, std::move(members)});
    if (rec.contains("secondary_members")) {
      std::vector<std::string> sec =
          json_strings(rec["secondary_members"], where + ": secondary_members");
      if (!sec.empty()) it->secondary[id] = std::move(sec);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!seen[i]) {
      throw InputError(path.generic_string() + ": no clusters for partition " +
                       partition_label(out[i].partition));
    }
    auto& cs = out[i].clusters.clusters;
    std::sort(cs.begin(), cs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    try {
      out[i].clusters.validate();
    } catch (const Error& e) {
      throw InputError(path.generic_string() + ": " + e.what());
    }
  }
  return out;
}

std::string keypoints_to_jsonl(const std::vector<kpg::KeyPointSet>& sets,
                               const std::string& config_hash) {
  std::string out = manifest_line("keypoints", config_hash).dump() + "\n";
  for (const kpg::KeyPointSet& set : sets) {
    for (const kpg::GeneratedKeyPoint& kp : set.key_points) {
      ordered_json rec;
      rec["kp_id"] = kp.id;
      rec["topic"] = set.topic_id;
      rec["stance"] = std::string(corpus::stance_name(set.stance));
      rec["text"] = kp.text;
      rec["rank"] = kp.rank;
      rec["effective_size"] = kp.effective_size;
      rec["centrality"] = kp.centrality;
      rec["source_clusters"] = kp.source_cluster_ids;
      out += rec.dump() + "\n";
    }
  }
  return out;
}

std::vector<kpg::KeyPointSet> keypoints_from_jsonl(const std::filesystem::path& path) {
  std::vector<kpg::KeyPointSet> out;
  for (const io::JsonLine& line : io::read_jsonl(path)) {
    const std::string where = path.generic_string() + ":" + std::to_string(line.line);
    const json& rec = line.value;
    kpg::KeyPointSet key{json_field(rec, "topic", where), json_stance(rec, where), {}};
    auto it = std::find_if(out.begin(), out.end(), [&](const kpg::KeyPointSet& s) {
      return s.topic_id == key.topic_id && s.stance == key.stance;
    });
    if (it == out.end()) {
      out.push_back(std::move(key));
      it = std::prev(out.end());
    }
    kpg::GeneratedKeyPoint kp;
    kp.text = json_field(rec, "text", where);
    kp.id = rec.value("kp_id", 0);
    kp.rank = rec.value("rank", static_cast<int>(it->key_points.size()) + 1);
    kp.effective_size = rec.value("effective_size", std::size_t{0});
    kp.centrality = rec.value("centrality", 0.0);
    if (rec.contains("source_clusters")) {
      kp.source_cluster_ids = rec["source_clusters"].get<std::vector<int>>();
    }
    it->key_points.push_back(std::move(kp));
  }
  for (auto& set : out) {
    std::stable_sort(set.key_points.begin(), set.key_points.end(),
                     [](const auto& a, const auto& b) { return a.rank < b.rank; });
  }
  return out;
}

// ---------------------------------------------------------------- runs

namespace {

class Timer {
 public:
  explicit Timer(std::vector<std::pair<std::string, double>>& sink, std::string name)
      : sink_(sink), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~Timer() {
    const auto d = std::chrono::steady_clock::now() - start_;
    sink_.emplace_back(name_, std::chrono::duration<double, std::milli>(d).count());
  }
  Timer(const Timer&) = delete;
  Timer& operator=(const Timer&) = delete;

 private:
  std::vector<std::pair<std::string, double>>& sink_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

ReferenceLookup corpus_references(const corpus::Corpus& corpus) {
  return [&corpus](const std::string& topic, corpus::Stance stance) {
    std::vector<std::string> out;
    for (const auto* kp : corpus.reference_kps_for(topic, stance)) out.push_back(kp->text);
    return out;
  };
}

std::size_t total_clusters(const std::vector<PartitionClusters>& clusters) {
  std::size_t n = 0;
  for (const auto& pc : clusters) n += pc.clusters.count();
  return n;
}

std::size_t total_kps(const std::vector<kpg::KeyPointSet>& sets) {
  std::size_t n = 0;
  for (const auto& s : sets) n += s.key_points.size();
  return n;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.generic_string() + ": " + ec.message());
}

}  // namespace

RunSummary run_pipeline(const PipelineConfig& config) {
  RunSummary summary;
  const std::string hash = config.hash();
  std::vector<io::AtomicWriter> writers;
  auto stage_file = [&](const std::string& name, const std::string& content) {
    writers.emplace_back(config.out_dir / name);
    writers.back().write(content);
    summary.outputs.push_back(config.out_dir / name);
  };

  Inputs inputs;
  {
    Timer t(summary.stage_ms, "load");
    inputs = load_inputs(config);
  }
  ensure_dir(config.out_dir);
  std::vector<PartitionClusters> clusters;
  {
    Timer t(summary.stage_ms, "kpm");
    clusters = cluster_stage(config, inputs);
  }
  {
    Timer t(summary.stage_ms, "ic");
    clusters = ic_stage(config, inputs, std::move(clusters));
  }
  stage_file("clusters.jsonl", clusters_to_jsonl(clusters, hash));
  std::vector<kpg::KeyPointSet> sets;
  {
    Timer t(summary.stage_ms, "kpg");
    std::unique_ptr<kpg::Generator> generator;
    run_stage("kpg", [&] { generator = make_generator(config); });
    sets = generate_stage(config, inputs, clusters, *generator);
  }
  stage_file("keypoints.jsonl", keypoints_to_jsonl(sets, hash));
  if (!inputs.corpus.reference_kps().empty()) {
    Timer t(summary.stage_ms, "eval");
    run_stage("eval", [&] {
      const auto scorer = make_scorer(config, inputs.encoder);
      summary.report = evaluate(sets, corpus_references(inputs.corpus), scorer.get());
    });
    stage_file("report.json", report_to_json(*summary.report, config).dump(2) + "\n");
  }
  summary.partitions = clusters.size();
  summary.clusters = total_clusters(clusters);
  summary.key_points = total_kps(sets);

  ordered_json manifest;
  manifest["_manifest"] = manifest_line("run", hash)["_manifest"];
  manifest["config_echo"] = config.echo();
  ordered_json timings;
  for (const auto& [name, ms] : summary.stage_ms) timings[name] = ms;
  manifest["stage_timings_ms"] = timings;
  ordered_json counts;
  counts["partitions"] = summary.partitions;
  counts["clusters"] = summary.clusters;
  counts["key_points"] = summary.key_points;
  manifest["counts"] = counts;
  stage_file("run_manifest.json", manifest.dump(2) + "\n");
  for (auto& w : writers) w.commit();
  return summary;
}

std::vector<double> LambdaRange::values() const {
  std::vector<double> out;
  if (!(step > 0.0) || !(stop >= start)) throw UsageError("empty sweep");
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double v = start + static_cast<double>(i) * step;
    out.push_back(std::round(v * 1e12) / 1e12);
  }
  return out;
}

LambdaRange parse_lambda_range(const std::string& text) {
  LambdaRange r;
  std::array<double*, 3> fields{&r.start, &r.stop, &r.step};
  std::size_t pos = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t colon = k < 2 ? text.find(':', pos) : text.size();
    if (colon == std::string::npos) throw UsageError("lambda range must be start:stop:step");
    const std::string part = text.substr(pos, colon - pos);
    char* end = nullptr;
    *fields[k] = std::strtod(part.c_str(), &end);
    if (part.empty() || end != part.c_str() + part.size() || !std::isfinite(*fields[k])) {
      throw UsageError("lambda range must be start:stop:step, got '" + text + "'");
    }
    pos = colon + 1;
  }
  return r;
}

std::vector<SweepRow> run_sweep(const PipelineConfig& config, const LambdaRange& range) {
  const std::vector<double> lambdas = range.values();
  const Inputs inputs = load_inputs(config);
  ensure_dir(config.out_dir);
  const std::vector<PartitionClusters> clustered = cluster_stage(config, inputs);
  std::unique_ptr<kpg::Generator> generator;
  run_stage("kpg", [&] { generator = make_generator(config); });
  std::unique_ptr<eval::PairScorer> scorer;
  const bool has_refs = !inputs.corpus.reference_kps().empty();
  if (has_refs) run_stage("eval", [&] { scorer = make_scorer(config, inputs.encoder); });

  std::vector<SweepRow> rows;
  std::string out = manifest_line("sweep", config.hash()).dump() + "\n";
  for (const double lambda : lambdas) {
    PipelineConfig c = config;
    c.ic.lambda = lambda;
    const auto clusters = ic_stage(c, inputs, clustered);
    const auto sets = generate_stage(c, inputs, clusters, *generator);
    SweepRow row;
    row.lambda = lambda;
    row.clusters = total_clusters(clusters);
    row.key_points = total_kps(sets);
    if (has_refs) {
      run_stage("eval", [&] { row.report = evaluate(sets, corpus_references(inputs.corpus), scorer.get()); });
    }
    ordered_json rec;
    rec["lambda"] = lambda;
    rec["clusters"] = row.clusters;
    rec["key_points"] = row.key_points;
    rec["rouge"] = row.report ? rouge_json(row.report->rouge) : ordered_json(nullptr);
    rec["soft"] = row.report ? soft_json(row.report->soft) : ordered_json(nullptr);
    out += rec.dump() + "\n";
    rows.push_back(std::move(row));
  }
  io::AtomicWriter w(config.out_dir / "sweep.jsonl");
  w.write(out);
  w.commit();
  return rows;
}

}  // namespace kpa::pipeline

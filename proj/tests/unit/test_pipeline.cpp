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

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "kpa/error.hpp"
#include "kpa/pipeline.hpp"
#include "stub_server.hpp"
#include "temp_dir.hpp"

using namespace kpa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kMini = fs::path(KPA_SOURCE_DIR) / "data" / "mini";

json mini_settings(const fs::path& out) {
  return {{"arguments", (kMini / "arguments.csv").string()},
          {"key-points", (kMini / "key_points.csv").string()},
          {"labels", (kMini / "labels.csv").string()},
          {"embeddings", (kMini / "embeddings.jsonl").string()},
          {"out", out.string()}};
}

std::vector<std::string> out_files(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

TEST_CASE("settings") {
  SUBCASE("defaults") {
    const auto c = pipeline::config_from_settings(json{{"arguments", "a.csv"}});
    CHECK(c.ic.lambda == 0.9);
    CHECK(c.max_kps == 8);
    CHECK(c.dedup_threshold == 0.95);
    CHECK(c.budget == 2000);
    CHECK(c.kpm.method == kpm::Method::kHdbscan);
    CHECK(c.backend == pipeline::BackendKind::kExtractive);
  }
  SUBCASE("typed and string values agree") {
    const auto a = pipeline::config_from_settings(
        json{{"arguments", "a.csv"}, {"lambda", 0.7}, {"min-cluster-size", 4}, {"allow-fallback", true}});
    const auto b = pipeline::config_from_settings(
        json{{"arguments", "a.csv"}, {"lambda", "0.7"}, {"min-cluster-size", "4"}, {"allow-fallback", "true"}});
    CHECK(a.ic.lambda == 0.7);
    CHECK(a.kpm.min_cluster_size == 4);
    CHECK(a.allow_fallback);
    CHECK(a.hash() == b.hash());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(pipeline::config_from_settings(json{{"arguments", "a.csv"}, {"lamda", 0.7}}), UsageError);
    CHECK_THROWS_AS(pipeline::config_from_settings(json{{"arguments", "a.csv"}, {"lambda", "high"}}), UsageError);
    CHECK_THROWS_AS(pipeline::config_from_settings(json{{"arguments", "a.csv"}, {"kpm", "dbscan"}}), UsageError);
    CHECK_THROWS_AS(pipeline::config_from_settings(json{{"arguments", "a.csv"}, {"max-kps", 0}}), UsageError);
    CHECK_THROWS_AS(pipeline::config_from_settings(json::array()), UsageError);
  }
  SUBCASE("hash tracks outputs, not scheduling") {
    const auto base = pipeline::config_from_settings(json{{"arguments", "a.csv"}});
    const auto moved = pipeline::config_from_settings(json{{"arguments", "a.csv"}, {"out", "elsewhere"}, {"jobs", 8}});
    const auto other = pipeline::config_from_settings(json{{"arguments", "a.csv"}, {"lambda", 0.8}});
    CHECK(base.hash() == moved.hash());
    CHECK(base.hash() != other.hash());
    CHECK(base.hash().size() == 16);
    CHECK(base.hash() == pipeline::config_from_settings(json{{"arguments", "a.csv"}}).hash());
  }
  SUBCASE("every setting name is accepted") {
    for (const auto& name : pipeline::setting_names()) {
      CHECK(std::find(pipeline::setting_names().begin(), pipeline::setting_names().end(), name) !=
            pipeline::setting_names().end());
    }
    CHECK(pipeline::setting_names().size() == 31);
  }
}

TEST_CASE("lambda ranges") {
  CHECK(pipeline::parse_lambda_range("0.6:0.9:0.1").values() == std::vector<double>{0.6, 0.7, 0.8, 0.9});
  CHECK(pipeline::parse_lambda_range("0.5:0.5:0.1").values() == std::vector<double>{0.5});
  CHECK(pipeline::parse_lambda_range("-1:1:1").values() == std::vector<double>{-1, 0, 1});
  CHECK_THROWS_AS(pipeline::parse_lambda_range("0.9:0.6:0.1").values(), UsageError);
  CHECK_THROWS_AS(pipeline::parse_lambda_range("0.6:0.9:0").values(), UsageError);
  CHECK_THROWS_AS(pipeline::parse_lambda_range("0.6:0.9"), UsageError);
  CHECK_THROWS_AS(pipeline::parse_lambda_range("a:b:c"), UsageError);
}

TEST_CASE("run stage wrapping") {
  try {
    pipeline::run_stage("kpm", [] { throw InputError("bad"); });
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()) == "stage 'kpm': bad");
  }
  CHECK_THROWS_AS(pipeline::run_stage("x", [] { throw std::runtime_error("odd"); }), StageError);
}

TEST_CASE("end to end on the mini corpus") {
  kpa::testing::TempDir dir;
  const auto config = pipeline::config_from_settings(mini_settings(dir / "run"));
  const auto summary = pipeline::run_pipeline(config);
  CHECK(summary.partitions == 4);
  CHECK(summary.key_points > 0);
  REQUIRE(summary.report.has_value());
  CHECK(out_files(dir / "run") ==
        std::vector<std::string>{"clusters.jsonl", "keypoints.jsonl", "report.json", "run_manifest.json"});

  const auto sets = pipeline::keypoints_from_jsonl(dir / "run" / "keypoints.jsonl");
  const auto inputs = pipeline::load_inputs(config);
  std::size_t total = 0;
  for (const auto& set : sets) {
    CHECK(set.key_points.size() <= config.max_kps);
    total += set.key_points.size();
    std::vector<std::string> texts;
    for (const auto& kp : set.key_points) {
      CHECK_FALSE(kp.source_cluster_ids.empty());
      CHECK(kp.effective_size >= 1);
      texts.push_back(kp.text);
    }
    const auto vecs = inputs.encoder->embed(texts);
    for (std::size_t a = 0; a < vecs.size(); ++a) {
      for (std::size_t b = a + 1; b < vecs.size(); ++b) CHECK(embedding::cosine(vecs[a], vecs[b]) < 0.95);
    }
  }
  CHECK(total == summary.key_points);

  const auto report = json::parse(kpa::testing::slurp(dir / "run" / "report.json"));
  CHECK(report["per_partition"].size() == 4);
  CHECK(report["config_echo"] == config.echo());
  CHECK(report.contains("tokenization"));

  SUBCASE("reruns are byte identical, also with threads") {
    auto again = mini_settings(dir / "again");
    again["jobs"] = 4;
    pipeline::run_pipeline(pipeline::config_from_settings(again));
    for (const std::string name : {"clusters.jsonl", "keypoints.jsonl", "report.json"}) {
      CAPTURE(name);
      CHECK(kpa::testing::slurp(dir / "run" / name) == kpa::testing::slurp(dir / "again" / name));
    }
  }
  SUBCASE("stage composition matches the full run") {
    auto clustered = pipeline::cluster_stage(config, inputs);
    for (const auto& pc : clustered) CHECK(pc.stage == "kpm");
    const auto file = dir.write("kpm.jsonl", pipeline::clusters_to_jsonl(clustered, config.hash()));
    auto reloaded = pipeline::clusters_from_jsonl(file, inputs.corpus);
    const auto after_ic = pipeline::ic_stage(config, inputs, std::move(reloaded));
    CHECK(pipeline::clusters_to_jsonl(after_ic, config.hash()) ==
          kpa::testing::slurp(dir / "run" / "clusters.jsonl"));
    CHECK_THROWS_AS(pipeline::ic_stage(config, inputs, after_ic), UsageError);
    const auto generator = pipeline::make_generator(config);
    const auto generated = pipeline::generate_stage(config, inputs, after_ic, *generator);
    CHECK(pipeline::keypoints_to_jsonl(generated, config.hash()) ==
          kpa::testing::slurp(dir / "run" / "keypoints.jsonl"));
  }
  SUBCASE("after iterative clustering nothing is an outlier") {
    const auto clusters = pipeline::ic_stage(config, inputs, pipeline::cluster_stage(config, inputs));
    std::size_t args = 0;
    for (const auto& pc : clusters) {
      CHECK(pc.clusters.outliers.empty());
      CHECK(pc.clusters.total_members() == pc.partition.arg_ids.size());
      args += pc.partition.arg_ids.size();
    }
    CHECK(args == inputs.corpus.arguments().size());
  }
  SUBCASE("a failing stage leaves earlier outputs untouched") {
    auto bad = mini_settings(dir / "run");
    bad["backend"] = "remote";
    bad["endpoint"] = kpa::testing::unused_url();
    bad["lambda"] = 0.5;
    const auto before = kpa::testing::slurp(dir / "run" / "clusters.jsonl");
    const auto kps_before = kpa::testing::slurp(dir / "run" / "keypoints.jsonl");
    try {
      pipeline::run_pipeline(pipeline::config_from_settings(bad));
      FAIL("expected an error");
    } catch (const BackendError& e) {
      CHECK(std::string(e.what()).rfind("stage 'kpg': ", 0) == 0);
    }
    CHECK(kpa::testing::slurp(dir / "run" / "clusters.jsonl") == before);
    CHECK(kpa::testing::slurp(dir / "run" / "keypoints.jsonl") == kps_before);
  }
  SUBCASE("fallback keeps the run alive") {
    auto fb = mini_settings(dir / "fallback");
    fb["backend"] = "remote";
    fb["endpoint"] = kpa::testing::unused_url();
    fb["allow-fallback"] = true;
    pipeline::run_pipeline(pipeline::config_from_settings(fb));
    CHECK(kpa::testing::slurp(dir / "fallback" / "keypoints.jsonl").size() ==
          kpa::testing::slurp(dir / "run" / "keypoints.jsonl").size());
  }
}

TEST_CASE("remote generation end to end") {
  kpa::testing::StubServer stub([](httplib::Server& s) {
    s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
    s.Post("/generate", [](const httplib::Request& req, httplib::Response& res) {
      const auto prompt = json::parse(req.body)["prompt"].get<std::string>();
      CHECK((prompt.rfind("Positive ", 0) == 0 || prompt.rfind("Negative ", 0) == 0));
      res.set_content(R"({"text":"KP"})", "application/json");
    });
    s.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
      const auto texts = json::parse(req.body)["texts"];
      std::vector<double> unit(16, 0.0);
      unit[0] = 1.0;
      res.set_content(json{{"vectors", json(std::vector<json>(texts.size(), unit))}}.dump(), "application/json");
    });
  });
  kpa::testing::TempDir dir;
  auto settings = mini_settings(dir / "remote");
  settings["backend"] = "remote";
  settings["endpoint"] = stub.url();
  settings["embed-endpoint"] = stub.url();
  settings["scorer"] = "rouge1";
  const auto summary = pipeline::run_pipeline(pipeline::config_from_settings(settings));
  // Every generated text is "KP", so each partition dedups to one key point.
  CHECK(summary.key_points == 4);
  for (const auto& set : pipeline::keypoints_from_jsonl(dir / "remote" / "keypoints.jsonl")) {
    REQUIRE(set.key_points.size() == 1);
    CHECK(set.key_points[0].text == "KP");
  }
}

TEST_CASE("sweep rows") {
  kpa::testing::TempDir dir;
  const auto config = pipeline::config_from_settings(mini_settings(dir.path()));
  const auto rows = pipeline::run_sweep(config, pipeline::parse_lambda_range("0.6:0.9:0.1"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].lambda == 0.6);
  CHECK(rows[3].lambda == 0.9);
  for (const auto& r : rows) CHECK(r.report.has_value());
  const auto text = kpa::testing::slurp(dir / "sweep.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("evaluation without a scorer") {
  kpg::KeyPointSet set;
  set.topic_id = "T";
  set.key_points.push_back({1, "the cat sat", {1}, 3, 0.5, 1});
  const auto report = pipeline::evaluate(
      {set}, [](const std::string&, corpus::Stance) { return std::vector<std::string>{"the cat ran"}; }, nullptr);
  REQUIRE(report.per_partition.size() == 1);
  CHECK(std::abs(report.rouge.r1 - 2.0 / 3.0) < 1e-12);
  CHECK_FALSE(report.soft.has_value());
  CHECK_FALSE(report.per_partition[0].soft.has_value());
}

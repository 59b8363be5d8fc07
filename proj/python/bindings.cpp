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

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kpa/augment.hpp"
#include "kpa/error.hpp"
#include "kpa/eval.hpp"
#include "kpa/hdbscan.hpp"
#include "kpa/pipeline.hpp"
#include "kpa/textrank.hpp"

namespace py = pybind11;
using namespace kpa;

namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& rows) { return Matrix::from_rows(rows); }

std::vector<embedding::Vector> to_vectors(const std::vector<std::vector<double>>& rows) {
  std::vector<embedding::Vector> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.emplace_back(r);
  return out;
}

eval::FunctionScorer wrap_scorer(const py::function& fn, double lo, double hi, bool symmetric) {
  return eval::FunctionScorer(
      [fn](const std::string& c, const std::string& r) { return fn(c, r).cast<double>(); }, {lo, hi},
      symmetric, "python");
}

py::dict soft_dict(const eval::SoftScores& s) {
  py::dict d;
  d["sP"] = s.precision;
  d["sR"] = s.recall;
  d["sF1"] = s.f1;
  return d;
}

py::dict rouge_dict(const eval::RougeScores& s) {
  py::dict d;
  d["rouge1"] = s.r1;
  d["rouge2"] = s.r2;
  d["rougeL"] = s.rl;
  return d;
}

// Settings arrive as a JSON string so every value type round-trips.
pipeline::PipelineConfig config_of(const std::string& settings_json) {
  return pipeline::config_from_settings(nlohmann::json::parse(settings_json));
}

std::string run(const std::string& settings_json) {
  const auto config = config_of(settings_json);
  py::gil_scoped_release release;
  const auto summary = pipeline::run_pipeline(config);
  nlohmann::ordered_json j;
  j["partitions"] = summary.partitions;
  j["clusters"] = summary.clusters;
  j["key_points"] = summary.key_points;
  nlohmann::ordered_json timings;
  for (const auto& [name, ms] : summary.stage_ms) timings[name] = ms;
  j["stage_ms"] = timings;
  j["outputs"] = nlohmann::json::array();
  for (const auto& p : summary.outputs) j["outputs"].push_back(p.string());
  j["report"] = summary.report ? pipeline::report_to_json(*summary.report, config) : nlohmann::ordered_json();
  return j.dump();
}

std::string sweep(const std::string& settings_json, const std::string& range) {
  const auto config = config_of(settings_json);
  const auto lambdas = pipeline::parse_lambda_range(range);
  py::gil_scoped_release release;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : pipeline::run_sweep(config, lambdas)) {
    nlohmann::ordered_json r;
    r["lambda"] = row.lambda;
    r["clusters"] = row.clusters;
    r["key_points"] = row.key_points;
    if (row.report) {
      r["rouge"] = {{"rouge1", row.report->rouge.r1}, {"rouge2", row.report->rouge.r2},
                    {"rougeL", row.report->rouge.rl}};
    }
    rows.push_back(r);
  }
  return rows.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Key point analysis toolkit: native core";

  static py::exception<kpa::Error> base(m, "KpaError", PyExc_RuntimeError);
  static py::exception<kpa::UsageError> usage(m, "UsageError", base.ptr());
  static py::exception<kpa::InputError> input(m, "InputError", base.ptr());
  static py::exception<kpa::StageError> stage(m, "StageError", base.ptr());
  static py::exception<kpa::BackendError> backend(m, "BackendError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const kpa::UsageError& e) {
      PyErr_SetString(usage.ptr(), e.what());
    } catch (const kpa::InputError& e) {
      PyErr_SetString(input.ptr(), e.what());
    } catch (const kpa::StageError& e) {
      PyErr_SetString(stage.ptr(), e.what());
    } catch (const kpa::BackendError& e) {
      PyErr_SetString(backend.ptr(), e.what());
    } catch (const kpa::Error& e) {
      PyErr_SetString(base.ptr(), e.what());
    }
  });

  m.def("_run", &run, py::arg("settings_json"));
  m.def("_sweep", &sweep, py::arg("settings_json"), py::arg("lambda_range"));
  m.def("setting_names", &pipeline::setting_names);
  m.def("config_hash", [](const std::string& s) { return config_of(s).hash(); }, py::arg("settings_json"));

  m.def(
      "soft_scores",
      [](const std::vector<std::string>& candidates, const std::vector<std::string>& references,
         const py::function& scorer, double lo, double hi) {
        return soft_dict(eval::soft_scores(candidates, references, wrap_scorer(scorer, lo, hi, false)));
      },
      py::arg("candidates"), py::arg("references"), py::arg("scorer"), py::arg("lo") = 0.0,
      py::arg("hi") = 1.0, "sP, sR and sF1 for a scorer called as scorer(candidate, reference).");
  m.def(
      "soft_scores_from_matrix",
      [](const std::vector<std::vector<double>>& scores) {
        return soft_dict(eval::soft_scores_from_matrix(to_matrix(scores)));
      },
      py::arg("scores"));
  m.def(
      "optimal_match",
      [](const std::vector<std::vector<double>>& scores) {
        const auto r = eval::optimal_match(to_matrix(scores));
        return std::make_pair(r.pairs, r.total);
      },
      py::arg("scores"), "Maximum-total matching of a square matrix: (pairs, total).");
  m.def("tokenize", [](const std::string& text) { return eval::tokenize(text); }, py::arg("text"));
  m.def(
      "rouge", [](const std::string& c, const std::string& r) { return rouge_dict(eval::rouge(c, r)); },
      py::arg("candidate"), py::arg("reference"));
  m.def(
      "corpus_rouge",
      [](const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& parts) {
        std::vector<eval::PartitionTexts> texts;
        for (const auto& [c, r] : parts) texts.push_back({c, r});
        return rouge_dict(eval::corpus_rouge(texts));
      },
      py::arg("partitions"), "Mean ROUGE over (candidates, references) partitions.");
  m.def(
      "spearman",
      [](const std::vector<double>& x, const std::vector<double>& y) { return eval::spearman(x, y); },
      py::arg("x"), py::arg("y"));
  m.def(
      "fractional_ranks", [](const std::vector<double>& x) { return eval::fractional_ranks(x); },
      py::arg("values"));

  m.def(
      "textrank",
      [](const std::vector<std::vector<double>>& weights, double damping, double tolerance,
         int max_iterations) {
        textrank::TextRankConfig cfg{damping, tolerance, max_iterations};
        return textrank::textrank(textrank::SimilarityGraph::from_weights(to_matrix(weights)), cfg);
      },
      py::arg("weights"), py::arg("damping") = 0.85, py::arg("tolerance") = 1e-6,
      py::arg("max_iterations") = 100);
  m.def(
      "hdbscan_labels",
      [](const std::vector<std::vector<double>>& points, std::size_t min_cluster_size,
         std::size_t min_samples) {
        return kpm::hdbscan_labels(to_vectors(points), min_cluster_size, min_samples);
      },
      py::arg("points"), py::arg("min_cluster_size") = 3, py::arg("min_samples") = 3);
  m.def(
      "kmeans_labels",
      [](const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed) {
        return kpm::kmeans_labels(to_vectors(points), k, seed);
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0);

  m.def(
      "quality_filter",
      [](const std::vector<std::tuple<std::string, std::string, std::string>>& pairs,
         const py::function& scorer, double drop_fraction) {
        std::vector<augment::AugmentedPair> in;
        for (const auto& [id, original, generated] : pairs) in.push_back({id, original, generated, {}, 0.0});
        std::vector<std::pair<std::string, double>> kept;
        for (const auto& p : augment::quality_filter(in, wrap_scorer(scorer, -1e300, 1e300, false), drop_fraction)) {
          kept.emplace_back(p.id, p.score);
        }
        return kept;
      },
      py::arg("pairs"), py::arg("scorer"), py::arg("drop_fraction") = augment::kDefaultDropFraction,
      "Keeps the (id, score) of pairs (id, original, generated) that survive the cut.");
}

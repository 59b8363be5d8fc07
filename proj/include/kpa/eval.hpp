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
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kpa/bridge.hpp"
#include "kpa/embedding.hpp"
#include "kpa/matrix.hpp"

namespace kpa::eval {

struct ScoreRange {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

using TextPair = std::pair<std::string, std::string>;  // (candidate, reference)

// Pairwise similarity f(candidate, reference). Scores outside the declared
// range are rejected, never renormalised.
class PairScorer {
 public:
  virtual ~PairScorer() = default;

  std::vector<double> score_pairs(std::span<const TextPair> pairs) const;
  // Entry (i, j) = f(candidates[i], references[j]).
  Matrix score_matrix(std::span<const std::string> candidates,
                      std::span<const std::string> references) const;

  virtual ScoreRange declared_range() const = 0;
  virtual bool symmetric() const = 0;
  virtual std::string name() const = 0;

 protected:
  virtual std::vector<double> score_batch(std::span<const TextPair> pairs) const = 0;
};

// Adapts a plain function; used for stubs and language bindings.
class FunctionScorer : public PairScorer {
 public:
  using Fn = std::function<double(const std::string&, const std::string&)>;
  FunctionScorer(Fn fn, ScoreRange range, bool symmetric, std::string name = "function");

  ScoreRange declared_range() const override { return range_; }
  bool symmetric() const override { return symmetric_; }
  std::string name() const override { return name_; }

 protected:
  std::vector<double> score_batch(std::span<const TextPair> pairs) const override;

 private:
  Fn fn_;
  ScoreRange range_;
  bool symmetric_;
  std::string name_;
};

// Cosine between the encoder's vectors of the two texts; range [-1, 1].
class CosineEmbeddingScorer : public PairScorer {
 public:
  explicit CosineEmbeddingScorer(std::shared_ptr<const embedding::Encoder> encoder)
      : encoder_(std::move(encoder)) {}

  ScoreRange declared_range() const override { return {-1.0, 1.0}; }
  bool symmetric() const override { return true; }
  std::string name() const override { return "cosine"; }

 protected:
  std::vector<double> score_batch(std::span<const TextPair> pairs) const override;

 private:
  std::shared_ptr<const embedding::Encoder> encoder_;
};

// ROUGE-1 F-measure between the two texts; range [0, 1], no model needed.
class Rouge1Scorer : public PairScorer {
 public:
  ScoreRange declared_range() const override { return {0.0, 1.0}; }
  bool symmetric() const override { return true; }
  std::string name() const override { return "rouge1"; }

 protected:
  std::vector<double> score_batch(std::span<const TextPair> pairs) const override;
};

// Delegates to the bridge's /score with the given metric name. The range
// is the one the service declares in its responses (unbounded until the
// first batch); scores outside it are rejected.
class RemoteScorer : public PairScorer {
 public:
  RemoteScorer(bridge::BridgeClient client, std::string metric, bool symmetric = false);

  ScoreRange declared_range() const override;
  bool symmetric() const override { return symmetric_; }
  std::string name() const override { return "remote:" + metric_; }

 protected:
  std::vector<double> score_batch(std::span<const TextPair> pairs) const override;

 private:
  bridge::BridgeClient client_;
  std::string metric_;
  bool symmetric_;
  mutable std::mutex mutex_;
  mutable ScoreRange range_;
};

struct SoftScores {
  double precision = 0.0;  // sP
  double recall = 0.0;     // sR
  double f1 = 0.0;         // sF1
};

// sP averages, over candidates, the best score against any reference; sR
// averages, over references, the best score from any candidate. f is
// always called as f(candidate, reference).
SoftScores soft_scores(std::span<const std::string> candidates,
                       std::span<const std::string> references, const PairScorer& scorer);
SoftScores soft_scores_from_matrix(const Matrix& scores);

double harmonic_mean(double p, double r);

struct AssignmentResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (candidate, reference), by candidate
  double total = 0.0;
};

// Maximum-total perfect matching of a square score matrix (Kuhn-Munkres).
// Among optimal matchings the lexicographically smallest is returned.
AssignmentResult optimal_match(const Matrix& scores);
AssignmentResult optimal_match(std::span<const std::string> candidates,
                               std::span<const std::string> references, const PairScorer& scorer);

struct RougeScores {
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
};

// Lowercased maximal alphanumeric runs; bytes >= 0x80 count as
// alphanumeric so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

// F-measures 2*overlap / (|candidate| + |reference|) for n-grams and LCS.
RougeScores rouge(std::string_view candidate, std::string_view reference);
RougeScores rouge_tokens(std::span<const std::string> candidate,
                         std::span<const std::string> reference);

struct PartitionTexts {
  std::vector<std::string> candidates;  // rank order
  std::vector<std::string> references;  // file order
};

// Per partition, scores the space-joined candidates against the
// space-joined references, then takes the unweighted mean.
RougeScores corpus_rouge(std::span<const PartitionTexts> partitions);

// Average ranks for ties, 1-based.
std::vector<double> fractional_ranks(std::span<const double> values);

// Pearson correlation of fractional ranks. Throws InputError on length
// mismatch, fewer than 3 values or constant input.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace kpa::eval

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

#include "kpa/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "kpa/error.hpp"

namespace kpa::eval {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimum-cost assignment on an n x n cost matrix; returns col[row].
std::vector<std::size_t> hungarian_min(const Matrix& cost) {
  const std::size_t n = cost.rows();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col(n, 0);
  for (std::size_t j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
  return col;
}

// Best total over the sub-matrix of the given rows and columns.
double best_total(const Matrix& scores, const std::vector<std::size_t>& rows,
                  const std::vector<std::size_t>& cols) {
  if (rows.empty()) return 0.0;
  Matrix cost(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) cost(r, c) = -scores(rows[r], cols[c]);
  }
  const std::vector<std::size_t> col = hungarian_min(cost);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) total += scores(rows[r], cols[col[r]]);
  return total;
}

std::map<std::string, std::size_t> ngram_counts(std::span<const std::string> tokens,
                                                std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key += '\x1f';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

double f_measure(std::size_t overlap, std::size_t cand_total, std::size_t ref_total,
                 bool identical) {
  if (cand_total + ref_total == 0) return identical ? 1.0 : 0.0;
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(cand_total + ref_total);
}

double rouge_n(std::span<const std::string> cand, std::span<const std::string> ref,
               std::size_t n, bool identical) {
  const auto c = ngram_counts(cand, n);
  const auto r = ngram_counts(ref, n);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : c) {
    const auto it = r.find(gram);
    if (it != r.end()) overlap += std::min(count, it->second);
  }
  const std::size_t ct = cand.size() >= n ? cand.size() - n + 1 : 0;
  const std::size_t rt = ref.size() >= n ? ref.size() - n + 1 : 0;
  return f_measure(overlap, ct, rt, identical);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string join(std::span<const std::string> parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

// Summed in sorted order so the result does not depend on input order.
double sorted_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (const double v : values) total += v;
  return total / static_cast<double>(values.size());
}

}  // namespace

std::vector<double> PairScorer::score_pairs(std::span<const TextPair> pairs) const {
  std::vector<double> scores = score_batch(pairs);
  if (scores.size() != pairs.size()) {
    throw BackendError("scorer " + name() + " returned " + std::to_string(scores.size()) +
                       " scores for " + std::to_string(pairs.size()) + " pairs");
  }
  const ScoreRange range = declared_range();
  for (const double s : scores) {
    if (!std::isfinite(s) || !range.contains(s)) {
      throw BackendError("scorer " + name() + " emitted " + std::to_string(s) +
                         " outside its declared range [" + std::to_string(range.lo) + ", " +
                         std::to_string(range.hi) + "]");
    }
  }
  return scores;
}

Matrix PairScorer::score_matrix(std::span<const std::string> candidates,
                                std::span<const std::string> references) const {
  std::vector<TextPair> pairs;
  pairs.reserve(candidates.size() * references.size());
  for (const auto& c : candidates) {
    for (const auto& r : references) pairs.emplace_back(c, r);
  }
  const std::vector<double> flat = score_pairs(pairs);
  Matrix m(candidates.size(), references.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (std::size_t j = 0; j < references.size(); ++j) m(i, j) = flat[i * references.size() + j];
  }
  return m;
}

FunctionScorer::FunctionScorer(Fn fn, ScoreRange range, bool symmetric, std::string name)
    : fn_(std::move(fn)), range_(range), symmetric_(symmetric), name_(std::move(name)) {}

std::vector<double> FunctionScorer::score_batch(std::span<const TextPair> pairs) const {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [c, r] : pairs) out.push_back(fn_(c, r));
  return out;
}

std::vector<double> CosineEmbeddingScorer::score_batch(std::span<const TextPair> pairs) const {
  std::vector<std::string> texts;
  std::map<std::string, std::size_t> slot;
  for (const auto& [c, r] : pairs) {
    for (const std::string* t : {&c, &r}) {
      if (slot.emplace(*t, texts.size()).second) texts.push_back(*t);
    }
  }
  const std::vector<embedding::Vector> vectors = encoder_->embed(texts);
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [c, r] : pairs) {
    out.push_back(embedding::cosine(vectors[slot.at(c)], vectors[slot.at(r)]));
  }
  return out;
}

std::vector<double> Rouge1Scorer::score_batch(std::span<const TextPair> pairs) const {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [c, r] : pairs) {
    const auto ct = tokenize(c);
    const auto rt = tokenize(r);
    out.push_back(rouge_n(ct, rt, 1, ct == rt));
  }
  return out;
}

RemoteScorer::RemoteScorer(bridge::BridgeClient client, std::string metric, bool symmetric)
    : client_(std::move(client)),
      metric_(std::move(metric)),
      symmetric_(symmetric),
      range_{-kInf, kInf} {}

ScoreRange RemoteScorer::declared_range() const {
  std::lock_guard lock(mutex_);
  return range_;
}

std::vector<double> RemoteScorer::score_batch(std::span<const TextPair> pairs) const {
  if (pairs.empty()) return {};
  const auto batch = client_.score(std::vector<TextPair>(pairs.begin(), pairs.end()), metric_);
  if (!(batch.lo <= batch.hi)) throw BackendError("/score declared an empty range");
  std::lock_guard lock(mutex_);
  range_ = {batch.lo, batch.hi};
  return batch.scores;
}

double harmonic_mean(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

SoftScores soft_scores_from_matrix(const Matrix& scores) {
  if (scores.rows() == 0 || scores.cols() == 0) {
    throw InputError("soft scores need non-empty candidate and reference sets");
  }
  std::vector<double> row_best(scores.rows(), -kInf);
  std::vector<double> col_best(scores.cols(), -kInf);
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      row_best[i] = std::max(row_best[i], scores(i, j));
      col_best[j] = std::max(col_best[j], scores(i, j));
    }
  }
  SoftScores s;
  s.precision = sorted_mean(std::move(row_best));
  s.recall = sorted_mean(std::move(col_best));
  s.f1 = harmonic_mean(s.precision, s.recall);
  return s;
}

SoftScores soft_scores(std::span<const std::string> candidates,
                       std::span<const std::string> references, const PairScorer& scorer) {
  if (candidates.empty() || references.empty()) {
    throw InputError("soft scores need non-empty candidate and reference sets");
  }
  return soft_scores_from_matrix(scorer.score_matrix(candidates, references));
}

AssignmentResult optimal_match(const Matrix& scores) {
  const std::size_t n = scores.rows();
  if (n == 0 || scores.cols() != n) {
    throw InputError("optimal matching needs equal, non-zero cardinalities (got " +
                     std::to_string(scores.rows()) + " candidates and " +
                     std::to_string(scores.cols()) + " references)");
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const double optimum = best_total(scores, all, all);
  const double slack = 1e-9 * std::max(1.0, std::abs(optimum));

  // Fix rows in order to the smallest column that still admits an optimum.
  AssignmentResult result;
  std::vector<std::size_t> free_cols = all;
  double fixed = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> rest_rows(all.begin() + static_cast<std::ptrdiff_t>(i) + 1, all.end());
    std::size_t chosen = free_cols.size();
    for (std::size_t c = 0; c < free_cols.size(); ++c) {
      std::vector<std::size_t> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(c));
      const double total = fixed + scores(i, free_cols[c]) + best_total(scores, rest_rows, rest_cols);
      if (total >= optimum - slack) {
        chosen = c;
        break;
      }
    }
    if (chosen == free_cols.size()) chosen = 0;  // unreachable up to rounding
    fixed += scores(i, free_cols[chosen]);
    result.pairs.emplace_back(i, free_cols[chosen]);
    free_cols.erase(free_cols.begin() + static_cast<std::ptrdiff_t>(chosen));
  }
  for (const auto& [i, j] : result.pairs) result.total += scores(i, j);
  return result;
}

AssignmentResult optimal_match(std::span<const std::string> candidates,
                               std::span<const std::string> references, const PairScorer& scorer) {
  if (candidates.size() != references.size() || candidates.empty()) {
    throw InputError("optimal matching needs equal, non-zero cardinalities (got " +
                     std::to_string(candidates.size()) + " candidates and " +
                     std::to_string(references.size()) + " references)");
  }
  return optimal_match(scorer.score_matrix(candidates, references));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

RougeScores rouge_tokens(std::span<const std::string> cand, std::span<const std::string> ref) {
  if (cand.empty() || ref.empty()) throw InputError("ROUGE input is empty after tokenization");
  const bool identical = std::equal(cand.begin(), cand.end(), ref.begin(), ref.end());
  RougeScores s;
  s.r1 = rouge_n(cand, ref, 1, identical);
  s.r2 = rouge_n(cand, ref, 2, identical);
  s.rl = f_measure(lcs_length(cand, ref), cand.size(), ref.size(), identical);
  return s;
}

RougeScores rouge(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  return rouge_tokens(c, r);
}

RougeScores corpus_rouge(std::span<const PartitionTexts> partitions) {
  if (partitions.empty()) throw InputError("corpus ROUGE needs at least one partition");
  RougeScores mean;
  for (const auto& p : partitions) {
    if (p.references.empty()) throw InputError("partition missing references");
    if (p.candidates.empty()) throw InputError("partition missing candidates");
    const RougeScores s = rouge(join(p.candidates), join(p.references));
    mean.r1 += s.r1;
    mean.r2 += s.r2;
    mean.rl += s.rl;
  }
  const auto n = static_cast<double>(partitions.size());
  mean.r1 /= n;
  mean.r2 /= n;
  mean.rl /= n;
  return mean;
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  for (std::size_t start = 0; start < n;) {
    std::size_t stop = start + 1;
    while (stop < n && values[idx[stop]] == values[idx[start]]) ++stop;
    // Ranks start+1 .. stop share their average.
    const double avg = static_cast<double>(start + 1 + stop) / 2.0;
    for (std::size_t k = start; k < stop; ++k) ranks[idx[k]] = avg;
    start = stop;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("spearman needs equal-length inputs");
  if (x.size() < 3) throw InputError("spearman needs at least 3 observations");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InputError("spearman input must be finite");
  }
  const std::vector<double> rx = fractional_ranks(x);
  const std::vector<double> ry = fractional_ranks(y);
  const double mean = static_cast<double>(x.size() + 1) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw InputError("spearman is undefined for constant input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace kpa::eval

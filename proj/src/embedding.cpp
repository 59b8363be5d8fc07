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

#include "kpa/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "kpa/error.hpp"
#include "kpa/io.hpp"

namespace kpa::embedding {

Vector::Vector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InputError("vector must have dim >= 1");
  for (double v : values_) {
    if (!std::isfinite(v)) throw InputError("non-finite value in vector");
  }
}

Kernel parse_kernel(std::string_view name) {
  if (name == "cosine") return Kernel::kCosine;
  if (name == "dot") return Kernel::kDot;
  throw UsageError("unknown kernel '" + std::string(name) + "' (expected cosine or dot)");
}

double dot(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) {
    throw InputError("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

double cosine(const Vector& a, const Vector& b) {
  const double ab = dot(a, b);
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw StageError("cosine of a zero-norm vector");
  return std::clamp(ab / (na * nb), -1.0, 1.0);
}

double similarity(const Vector& a, const Vector& b, Kernel kernel) {
  return kernel == Kernel::kCosine ? cosine(a, b) : dot(a, b);
}

Vector centroid(std::span<const Vector> vectors) {
  if (vectors.empty()) throw StageError("centroid of an empty set");
  std::vector<double> sum(vectors.front().dim(), 0.0);
  for (const Vector& v : vectors) {
    if (v.dim() != sum.size()) throw InputError("dimension mismatch in centroid");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
  }
  for (double& s : sum) s /= static_cast<double>(vectors.size());
  return Vector(std::move(sum));
}

std::size_t medoid(std::span<const Vector> vectors) {
  if (vectors.empty()) throw StageError("medoid of an empty set");
  const Matrix sim = similarity_matrix(vectors, vectors);
  std::size_t best = 0;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < vectors.size(); ++j) {
      if (j != i) s += sim(i, j);
    }
    if (s > best_sum) {
      best_sum = s;
      best = i;
    }
  }
  return best;
}

Matrix similarity_matrix(std::span<const Vector> a, std::span<const Vector> b, Kernel kernel) {
  Matrix m(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = similarity(a[i], b[j], kernel);
  }
  return m;
}

void EmbeddingStore::insert(std::string id, Vector v) {
  if (vectors_.empty()) {
    dim_ = v.dim();
  } else if (v.dim() != dim_) {
    throw InputError("dimension mismatch: id '" + id + "' has dim " + std::to_string(v.dim()) +
                     ", expected " + std::to_string(dim_));
  }
  const std::string key = id;
  if (!vectors_.emplace(std::move(id), std::move(v)).second) {
    throw InputError("duplicate embedding id '" + key + "'");
  }
}

const Vector* EmbeddingStore::find(std::string_view id) const {
  const auto it = vectors_.find(id);
  return it == vectors_.end() ? nullptr : &it->second;
}

const Vector& EmbeddingStore::at(std::string_view id) const {
  const Vector* v = find(id);
  if (v == nullptr) throw InputError("no embedding for id '" + std::string(id) + "'");
  return *v;
}

std::vector<std::string> EmbeddingStore::ids() const {
  std::vector<std::string> out;
  out.reserve(vectors_.size());
  for (const auto& [id, v] : vectors_) out.push_back(id);
  return out;
}

std::vector<Vector> EmbeddingStore::gather(std::span<const std::string> ids) const {
  std::vector<Vector> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(at(id));
  return out;
}

EmbeddingStore EmbeddingStore::subset(std::span<const std::string> ids) const {
  EmbeddingStore out;
  for (const auto& id : ids) out.insert(id, at(id));
  return out;
}

EmbeddingStore load_embedding_file(const std::filesystem::path& path) {
  EmbeddingStore store;
  for (const auto& line : io::read_jsonl(path)) {
    const std::string where = path.string() + ":" + std::to_string(line.line);
    const auto id = line.value.find("id");
    const auto vec = line.value.find("vector");
    if (id == line.value.end() || vec == line.value.end() || !vec->is_array()) {
      throw InputError(where + ": malformed row: expected {\"id\", \"vector\": [...]}");
    }
    std::string key = id->is_string() ? id->get<std::string>() : id->dump();
    std::vector<double> values;
    values.reserve(vec->size());
    for (const auto& x : *vec) {
      if (!x.is_number()) throw InputError(where + ": non-finite value in vector");
      values.push_back(x.get<double>());
    }
    try {
      store.insert(std::move(key), Vector(std::move(values)));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (store.empty()) throw InputError(path.string() + ": empty file (no vectors)");
  return store;
}

std::string to_jsonl(const EmbeddingStore& store) {
  std::string out;
  for (const auto& [id, v] : store.entries()) {
    nlohmann::ordered_json row;
    row["id"] = id;
    row["vector"] = std::vector<double>(v.values().begin(), v.values().end());
    out += row.dump();
    out += '\n';
  }
  return out;
}

StoreLookupEncoder::StoreLookupEncoder(const corpus::Corpus& corpus, const EmbeddingStore& store) {
  for (const auto& a : corpus.arguments()) {
    if (const Vector* v = store.find(a.id)) by_text_.emplace(a.text, *v);
  }
  for (const auto& k : corpus.reference_kps()) {
    if (const Vector* v = store.find(k.id)) by_text_.emplace(k.text, *v);
  }
}

std::vector<Vector> StoreLookupEncoder::embed(const std::vector<std::string>& texts) const {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    const auto it = by_text_.find(t);
    if (it == by_text_.end()) {
      throw InputError("no stored embedding for text \"" + t.substr(0, 60) +
                       "\" (use an embedding bridge for free-form texts)");
    }
    out.push_back(it->second);
  }
  return out;
}

const Vector* StoreLookupEncoder::find(std::string_view text) const {
  const auto it = by_text_.find(text);
  return it == by_text_.end() ? nullptr : &it->second;
}

EmbeddingStore attach_embeddings(const corpus::Corpus& corpus, const EmbeddingStore& source) {
  std::vector<std::string> missing;
  EmbeddingStore out;
  for (const auto& a : corpus.arguments()) {
    const Vector* v = source.find(a.id);
    if (v == nullptr) {
      missing.push_back(a.id);
      continue;
    }
    out.insert(a.id, *v);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "missing embeddings for " << missing.size() << " argument id(s):";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg << ' ' << missing[i];
    if (missing.size() > 20) msg << " ...";
    throw InputError(msg.str());
  }
  return out;
}

EmbeddingStore attach_embeddings(const corpus::Corpus& corpus, const Encoder& encoder) {
  std::vector<std::string> texts;
  for (const auto& a : corpus.arguments()) texts.push_back(a.text);
  const std::vector<Vector> vectors = encoder.embed(texts);
  if (vectors.size() != texts.size()) throw BackendError("encoder returned a short batch");
  EmbeddingStore out;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    out.insert(corpus.arguments()[i].id, vectors[i]);
  }
  return out;
}

}  // namespace kpa::embedding

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
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kpa/corpus.hpp"
#include "kpa/matrix.hpp"

namespace kpa::embedding {

// A finite, non-empty dense vector.
class Vector {
 public:
  explicit Vector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> values_;
};

enum class Kernel { kCosine, kDot };

Kernel parse_kernel(std::string_view name);

double dot(const Vector& a, const Vector& b);
double norm(const Vector& a);

// Clamped to [-1, 1]. Throws StageError on a zero-norm input and
// InputError on a dimension mismatch.
double cosine(const Vector& a, const Vector& b);
double similarity(const Vector& a, const Vector& b, Kernel kernel);

// Both throw StageError on an empty list.
Vector centroid(std::span<const Vector> vectors);

// Index maximising summed cosine similarity to the other members; ties go
// to the lowest index.
std::size_t medoid(std::span<const Vector> vectors);

Matrix similarity_matrix(std::span<const Vector> a, std::span<const Vector> b,
                         Kernel kernel = Kernel::kCosine);

// Vectors keyed by id, all of one dimension.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  // Throws InputError("dimension mismatch ...") when v disagrees with
  // vectors already stored, and on duplicate ids.
  void insert(std::string id, Vector v);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  bool empty() const noexcept { return vectors_.empty(); }
  bool contains(std::string_view id) const { return vectors_.find(id) != vectors_.end(); }

  const Vector* find(std::string_view id) const;
  // Throws InputError when the id is absent.
  const Vector& at(std::string_view id) const;

  std::vector<std::string> ids() const;
  std::vector<Vector> gather(std::span<const std::string> ids) const;
  EmbeddingStore subset(std::span<const std::string> ids) const;

  const std::map<std::string, Vector, std::less<>>& entries() const { return vectors_; }

  bool operator==(const EmbeddingStore&) const = default;

 private:
  std::size_t dim_ = 0;
  std::map<std::string, Vector, std::less<>> vectors_;
};

// JSONL, one {"id": "...", "vector": [...]} per line.
EmbeddingStore load_embedding_file(const std::filesystem::path& path);
std::string to_jsonl(const EmbeddingStore& store);

// Maps texts to vectors. Implementations must be safe to call concurrently.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::vector<Vector> embed(const std::vector<std::string>& texts) const = 0;
};

// Looks texts up among the corpus's arguments and reference key points and
// returns the stored vector of the first id carrying that exact text.
class StoreLookupEncoder : public Encoder {
 public:
  StoreLookupEncoder(const corpus::Corpus& corpus, const EmbeddingStore& store);
  std::vector<Vector> embed(const std::vector<std::string>& texts) const override;
  // nullptr when the text has no stored embedding.
  const Vector* find(std::string_view text) const;

 private:
  std::map<std::string, Vector, std::less<>> by_text_;
};

// Returns a store holding exactly the corpus's argument ids. Throws
// InputError listing the ids the source does not cover.
EmbeddingStore attach_embeddings(const corpus::Corpus& corpus, const EmbeddingStore& source);
EmbeddingStore attach_embeddings(const corpus::Corpus& corpus, const Encoder& encoder);

}  // namespace kpa::embedding

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
#include <optional>
#include <string_view>
#include <vector>

#include "kpa/embedding.hpp"

namespace kpa::reduction {

enum class Method { kIdentity, kPca };

Method parse_method(std::string_view name);

struct ReducerConfig {
  Method method = Method::kPca;
  // Unset means 5 for PCA and the input dimension for identity.
  std::optional<std::size_t> target_dim;
  std::uint64_t seed = 0;
  double tolerance = 1e-10;
  int max_iterations = 1000;
};

inline constexpr std::size_t kDefaultPcaDim = 5;

struct PrincipalComponents {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // unit vectors, descending variance
  std::vector<double> variances;
};

// Covariance eigendecomposition by power iteration with deflation. Each
// component's sign is fixed so its largest-magnitude entry is positive.
PrincipalComponents principal_components(const std::vector<embedding::Vector>& points,
                                         std::size_t count, std::uint64_t seed,
                                         double tolerance = 1e-10, int max_iterations = 1000);

embedding::EmbeddingStore reduce(const embedding::EmbeddingStore& store,
                                 const ReducerConfig& config);

}  // namespace kpa::reduction

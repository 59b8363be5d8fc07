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

#include "kpa/reduction.hpp"

#include <cmath>

#include "kpa/error.hpp"
#include "kpa/matrix.hpp"
#include "kpa/rng.hpp"

namespace kpa::reduction {
namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Removes the projections onto `basis` (modified Gram-Schmidt) and returns
// the remaining norm.
double orthogonalize(Vec& v, const std::vector<Vec>& basis) {
  for (const Vec& b : basis) {
    const double p = dot(v, b);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * b[i];
  }
  return std::sqrt(dot(v, v));
}

void fix_sign(Vec& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (v[arg] < 0.0) {
    for (double& x : v) x = -x;
  }
}

Vec multiply(const Matrix& m, const Vec& v) {
  Vec out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) s += m(r, c) * v[c];
    out[r] = s;
  }
  return out;
}

}  // namespace

Method parse_method(std::string_view name) {
  if (name == "identity") return Method::kIdentity;
  if (name == "pca") return Method::kPca;
  throw UsageError("unknown reducer '" + std::string(name) + "' (expected identity or pca)");
}

PrincipalComponents principal_components(const std::vector<embedding::Vector>& points,
                                         std::size_t count, std::uint64_t seed,
                                         double tolerance, int max_iterations) {
  if (points.empty()) throw InputError("pca needs at least one point");
  const std::size_t n = points.size();
  const std::size_t dim = points.front().dim();
  if (count > dim) {
    throw InputError("target_dim " + std::to_string(count) + " exceeds input dim " +
                     std::to_string(dim));
  }
  if (n < count) {
    throw InputError("pca needs at least target_dim points (" + std::to_string(n) + " < " +
                     std::to_string(count) + ")");
  }

  PrincipalComponents pc;
  pc.mean.assign(dim, 0.0);
  for (const auto& p : points) {
    for (std::size_t i = 0; i < dim; ++i) pc.mean[i] += p[i];
  }
  for (double& m : pc.mean) m /= static_cast<double>(n);

  Matrix cov(dim, dim);
  for (const auto& p : points) {
    for (std::size_t r = 0; r < dim; ++r) {
      const double dr = p[r] - pc.mean[r];
      for (std::size_t c = r; c < dim; ++c) cov(r, c) += dr * (p[c] - pc.mean[c]);
    }
  }
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = r; c < dim; ++c) {
      cov(r, c) /= denom;
      cov(c, r) = cov(r, c);
    }
  }

  double trace = 0.0;
  for (std::size_t i = 0; i < dim; ++i) trace += cov(i, i);
  const double negligible = 1e-14 * std::max(trace, 1e-300);

  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    Vec v(dim);
    double len = 0.0;
    while (len < 1e-8) {
      for (double& x : v) x = rng.normal();
      len = orthogonalize(v, pc.components);
    }
    for (double& x : v) x /= len;

    double eigenvalue = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
      Vec w = multiply(cov, v);
      const double wlen = orthogonalize(w, pc.components);
      if (wlen <= negligible) {
        // Remaining variance is zero: any unit vector orthogonal to the
        // previous components is an eigenvector.
        eigenvalue = 0.0;
        break;
      }
      for (double& x : w) x /= wlen;
      eigenvalue = wlen;
      double delta = 0.0;
      for (std::size_t i = 0; i < dim; ++i) delta = std::max(delta, std::abs(w[i] - v[i]));
      v = std::move(w);
      if (delta < tolerance) break;
    }
    fix_sign(v);
    // Deflate so later components see only the residual spectrum.
    for (std::size_t r = 0; r < dim; ++r) {
      for (std::size_t c = 0; c < dim; ++c) cov(r, c) -= eigenvalue * v[r] * v[c];
    }
    pc.components.push_back(std::move(v));
    pc.variances.push_back(eigenvalue);
  }
  return pc;
}

embedding::EmbeddingStore reduce(const embedding::EmbeddingStore& store,
                                 const ReducerConfig& config) {
  if (store.empty()) throw InputError("cannot reduce an empty embedding store");
  if (config.method == Method::kIdentity) {
    if (config.target_dim && *config.target_dim != store.dim()) {
      throw InputError("identity reducer requires target_dim == input dim (" +
                       std::to_string(store.dim()) + ")");
    }
    return store;
  }

  const std::size_t target = config.target_dim.value_or(kDefaultPcaDim);
  if (target == 0) throw InputError("target_dim must be positive");
  if (target > store.dim()) {
    throw InputError("target_dim " + std::to_string(target) + " exceeds input dim " +
                     std::to_string(store.dim()));
  }
  std::vector<embedding::Vector> points;
  std::vector<std::string> ids;
  for (const auto& [id, v] : store.entries()) {
    ids.push_back(id);
    points.push_back(v);
  }
  const PrincipalComponents pc =
      principal_components(points, target, config.seed, config.tolerance, config.max_iterations);

  embedding::EmbeddingStore out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<double> y(target, 0.0);
    for (std::size_t k = 0; k < target; ++k) {
      double s = 0.0;
      for (std::size_t d = 0; d < store.dim(); ++d) {
        s += (points[i][d] - pc.mean[d]) * pc.components[k][d];
      }
      y[k] = s;
    }
    out.insert(ids[i], embedding::Vector(std::move(y)));
  }
  return out;
}

}  // namespace kpa::reduction

// Copyright 2026 The blockmetric Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blockmetric/errors.hpp"
#include "blockmetric/matrix.hpp"

namespace blockmetric {

enum class Variant : std::uint8_t { kCosine = 0, kDiag = 1, kBlockDiag = 2, kDense = 3 };

std::string_view to_string(Variant v);
// Accepts "cosine", "diag", "bdiag" (or "blockdiag"), "dense".
Variant parse_variant(std::string_view name);

// Shape of the structural mask. block_size is only meaningful for
// kBlockDiag and is 0 for every other variant.
class MetricConfig {
 public:
  MetricConfig() = default;

  static MetricConfig cosine(std::size_t dim) { return make(Variant::kCosine, dim); }
  static MetricConfig diag(std::size_t dim) { return make(Variant::kDiag, dim); }
  static MetricConfig block_diag(std::size_t dim, std::size_t block_size) {
    return make(Variant::kBlockDiag, dim, block_size);
  }
  static MetricConfig dense(std::size_t dim) { return make(Variant::kDense, dim); }

  // Throws ConfigError on dim == 0, or for kBlockDiag when block_size is
  // outside [1, dim] or does not divide dim.
  static MetricConfig make(Variant variant, std::size_t dim, std::size_t block_size = 0);

  Variant variant() const noexcept { return variant_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t block_size() const noexcept { return block_size_; }
  std::size_t block_count() const noexcept {
    return variant_ == Variant::kBlockDiag ? dim_ / block_size_ : 0;
  }

  // Width of the groups scores are accumulated over: d for BlockDiag,
  // D for Dense, 1 for Diag/Cosine.
  std::size_t group_width() const noexcept {
    switch (variant_) {
      case Variant::kBlockDiag: return block_size_;
      case Variant::kDense: return dim_;
      default: return 1;
    }
  }

  friend bool operator==(const MetricConfig&, const MetricConfig&) = default;

 private:
  MetricConfig(Variant v, std::size_t dim, std::size_t block_size)
      : variant_(v), dim_(dim), block_size_(block_size) {}

  Variant variant_ = Variant::kCosine;
  std::size_t dim_ = 0;
  std::size_t block_size_ = 0;
};

// Number of stored weights: 0, D, N*d*d = D*d, D*D.
std::size_t param_count(const MetricConfig& config);

struct SupportEntry {
  std::size_t row;
  std::size_t col;
};

// Position in the conceptual D x D matrix of stored weight `index`.
// Storage order: Diag by channel; BlockDiag as N contiguous row-major
// d x d blocks; Dense row-major.
inline SupportEntry support_entry(const MetricConfig& config, std::size_t index) {
  switch (config.variant()) {
    case Variant::kDiag:
      return {index, index};
    case Variant::kBlockDiag: {
      const std::size_t d = config.block_size();
      const std::size_t block = index / (d * d);
      const std::size_t rem = index % (d * d);
      return {block * d + rem / d, block * d + rem % d};
    }
    case Variant::kDense:
      return {index / config.dim(), index % config.dim()};
    case Variant::kCosine:
      break;
  }
  throw ConfigError("cosine metric has no stored weights");
}

// True when (row, col) lies in the support of the mask U.
bool in_support(const MetricConfig& config, std::size_t row, std::size_t col);

// Learnable weights restricted to the mask support. Off-support entries of
// W are never stored, so they stay exactly zero.
template <class Real>
struct MetricParamsT {
  MetricConfig config;
  std::vector<Real> weights;

  MetricParamsT() = default;
  MetricParamsT(MetricConfig cfg, std::vector<Real> w)
      : config(cfg), weights(std::move(w)) {
    if (weights.size() != param_count(config)) {
      throw ConfigError("weight count " + std::to_string(weights.size()) +
                        " does not match param_count " +
                        std::to_string(param_count(config)));
    }
  }

  std::size_t dim() const noexcept { return config.dim(); }

  template <class Other>
  MetricParamsT<Other> cast() const {
    return {config, std::vector<Other>(weights.begin(), weights.end())};
  }

  friend bool operator==(const MetricParamsT&, const MetricParamsT&) = default;
};

using MetricParams = MetricParamsT<float>;
using MetricParams64 = MetricParamsT<double>;

template <class Real>
MetricParamsT<Real> init_identity(const MetricConfig& config) {
  std::vector<Real> w(param_count(config), Real(0));
  for (std::size_t k = 0; k < w.size(); ++k) {
    const auto e = support_entry(config, k);
    if (e.row == e.col) w[k] = Real(1);
  }
  return {config, std::move(w)};
}

// Gaussian weights with standard deviation 1/sqrt(group width), the
// non-cosine starting point used by the initialization ablation.
// `Rng` must provide `double gaussian()`.
template <class Real, class Rng>
MetricParamsT<Real> init_random(const MetricConfig& config, Rng& rng) {
  std::vector<Real> w(param_count(config));
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.group_width()));
  for (auto& v : w) v = static_cast<Real>(scale * rng.gaussian());
  return {config, std::move(w)};
}

template <class Real>
Matrix<Real> materialize_dense(const MetricParamsT<Real>& params) {
  const std::size_t dim = params.dim();
  if (params.config.variant() == Variant::kCosine) return Matrix<Real>::identity(dim);
  Matrix<Real> m(dim, dim);
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    const auto e = support_entry(params.config, k);
    m(e.row, e.col) = params.weights[k];
  }
  return m;
}

namespace detail {

inline void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ConfigError(std::string(what) + ": dimension " + std::to_string(got) +
                      " does not match metric dimension " + std::to_string(want));
  }
}

// p = (W o U) y, each row accumulated in ascending column order.
template <class Real>
void project_right_into(const MetricParamsT<Real>& params, std::span<const Real> y,
                        std::span<Real> out) {
  const auto& cfg = params.config;
  const std::size_t dim = cfg.dim();
  const Real* w = params.weights.data();
  switch (cfg.variant()) {
    case Variant::kCosine:
      for (std::size_t m = 0; m < dim; ++m) out[m] = y[m];
      return;
    case Variant::kDiag:
      for (std::size_t m = 0; m < dim; ++m) out[m] = w[m] * y[m];
      return;
    case Variant::kBlockDiag:
    case Variant::kDense: {
      const std::size_t d = cfg.group_width();
      for (std::size_t base = 0; base < dim; base += d) {
        for (std::size_t i = 0; i < d; ++i) {
          Real inner = Real(0);
          for (std::size_t j = 0; j < d; ++j) inner += w[j] * y[base + j];
          out[base + i] = inner;
          w += d;
        }
      }
      return;
    }
  }
}

// Sum of x_i p_i, accumulated per group of `width` channels, then across
// groups in ascending order.
template <class Real>
Real grouped_dot(std::span<const Real> x, std::span<const Real> p, std::size_t width) {
  if (width == 1) {
    Real acc = Real(0);
    for (std::size_t m = 0; m < x.size(); ++m) acc += x[m] * p[m];
    return acc;
  }
  Real total = Real(0);
  for (std::size_t base = 0; base < x.size(); base += width) {
    Real block = Real(0);
    for (std::size_t i = 0; i < width; ++i) block += x[base + i] * p[base + i];
    total += block;
  }
  return total;
}

}  // namespace detail

// v / max(||v||, eps). Throws NumericError on non-finite components.
template <class Real>
std::vector<Real> l2_normalize(std::span<const Real> v, double eps = 1e-12) {
  if (v.empty()) throw ConfigError("l2_normalize: empty vector");
  double sq = 0.0;
  for (Real a : v) {
    if (!std::isfinite(static_cast<double>(a))) {
      throw NumericError("l2_normalize: non-finite component");
    }
    sq += static_cast<double>(a) * static_cast<double>(a);
  }
  const double denom = std::max(std::sqrt(sq), eps);
  std::vector<Real> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<Real>(static_cast<double>(v[i]) / denom);
  }
  return out;
}

// Normalizes every row; rows that are exactly zero are rejected.
template <class Real>
FeatureMatrixT<Real> normalize_rows(const Matrix<Real>& raw) {
  Matrix<Real> out(raw.rows(), raw.cols());
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    const auto row = raw.row(r);
    bool all_zero = true;
    for (Real a : row) all_zero = all_zero && a == Real(0);
    if (all_zero) {
      throw ConfigError("normalize_rows: row " + std::to_string(r) + " is the zero vector");
    }
    const auto unit = l2_normalize<Real>(row);
    std::copy(unit.begin(), unit.end(), out.row(r).begin());
  }
  return {std::move(out), true};
}

// x^T (W o U) y. Accumulation: per row of W (ascending column), then per
// block, then across blocks in ascending order. Diag evaluates
// w_m * (x_m * y_m), which keeps it exactly symmetric in x and y.
template <class Real>
Real score_pair(std::span<const Real> x, std::span<const Real> y,
                const MetricParamsT<Real>& params) {
  detail::check_dim(x.size(), params.dim(), "score_pair x");
  detail::check_dim(y.size(), params.dim(), "score_pair y");
  const auto& cfg = params.config;
  const Real* w = params.weights.data();
  switch (cfg.variant()) {
    case Variant::kCosine: {
      Real acc = Real(0);
      for (std::size_t m = 0; m < x.size(); ++m) acc += x[m] * y[m];
      return acc;
    }
    case Variant::kDiag: {
      Real acc = Real(0);
      for (std::size_t m = 0; m < x.size(); ++m) acc += w[m] * (x[m] * y[m]);
      return acc;
    }
    case Variant::kBlockDiag:
    case Variant::kDense: {
      const std::size_t d = cfg.group_width();
      Real total = Real(0);
      for (std::size_t base = 0; base < x.size(); base += d) {
        Real block = Real(0);
        for (std::size_t i = 0; i < d; ++i) {
          Real inner = Real(0);
          for (std::size_t j = 0; j < d; ++j) inner += w[j] * y[base + j];
          block += x[base + i] * inner;
          w += d;
        }
        total += block;
      }
      return total;
    }
  }
  return Real(0);
}

// Batched scores. Bitwise equal to calling score_pair on every (q, g):
// the gallery is projected once with the same per-row accumulation and
// then reduced with the same grouping.
template <class Real>
SimilarityMatrixT<Real> score_matrix(const FeatureMatrixT<Real>& queries,
                                     const FeatureMatrixT<Real>& gallery,
                                     const MetricParamsT<Real>& params) {
  detail::check_dim(queries.dim(), params.dim(), "score_matrix queries");
  detail::check_dim(gallery.dim(), params.dim(), "score_matrix gallery");
  SimilarityMatrixT<Real> scores(queries.rows(), gallery.rows());
  if (params.config.variant() == Variant::kDiag) {
    for (std::size_t q = 0; q < queries.rows(); ++q)
      for (std::size_t g = 0; g < gallery.rows(); ++g)
        scores(q, g) = score_pair(queries.row(q), gallery.row(g), params);
    return scores;
  }
  const std::size_t dim = params.dim();
  Matrix<Real> projected(gallery.rows(), dim);
  for (std::size_t g = 0; g < gallery.rows(); ++g) {
    detail::project_right_into(params, gallery.row(g), projected.row(g));
  }
  const std::size_t width = params.config.group_width();
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    const auto x = queries.row(q);
    for (std::size_t g = 0; g < gallery.rows(); ++g) {
      scores(q, g) = detail::grouped_dot<Real>(x, projected.row(g), width);
    }
  }
  return scores;
}

enum class ProjectionSide { kLeft, kRight };

// Left maps x to (W o U)^T x, Right maps y to (W o U) y, so a plain dot
// product against the other side reproduces score_pair. Rows are not
// re-normalized.
template <class Real>
FeatureMatrixT<Real> pre_project(const FeatureMatrixT<Real>& features,
                                 const MetricParamsT<Real>& params, ProjectionSide side) {
  detail::check_dim(features.dim(), params.dim(), "pre_project");
  const std::size_t dim = params.dim();
  Matrix<Real> out(features.rows(), dim);
  if (side == ProjectionSide::kRight) {
    for (std::size_t r = 0; r < features.rows(); ++r) {
      detail::project_right_into(params, features.row(r), out.row(r));
    }
    return {std::move(out), false};
  }
  const auto& cfg = params.config;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto x = features.row(r);
    auto dst = out.row(r);
    switch (cfg.variant()) {
      case Variant::kCosine:
        std::copy(x.begin(), x.end(), dst.begin());
        break;
      case Variant::kDiag:
        for (std::size_t m = 0; m < dim; ++m) dst[m] = params.weights[m] * x[m];
        break;
      case Variant::kBlockDiag:
      case Variant::kDense: {
        const std::size_t d = cfg.group_width();
        for (std::size_t base = 0; base < dim; base += d) {
          const Real* w = params.weights.data() + base * d;
          for (std::size_t j = 0; j < d; ++j) {
            Real acc = Real(0);
            for (std::size_t i = 0; i < d; ++i) acc += w[i * d + j] * x[base + i];
            dst[base + j] = acc;
          }
        }
        break;
      }
    }
  }
  return {std::move(out), false};
}

template <class Real>
Real dot(std::span<const Real> a, std::span<const Real> b) {
  Real acc = Real(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Plain dot-product score grid, used on pre-projected features.
template <class Real>
SimilarityMatrixT<Real> dot_matrix(const FeatureMatrixT<Real>& queries,
                                   const FeatureMatrixT<Real>& gallery) {
  detail::check_dim(gallery.dim(), queries.dim(), "dot_matrix");
  SimilarityMatrixT<Real> scores(queries.rows(), gallery.rows());
  for (std::size_t q = 0; q < queries.rows(); ++q)
    for (std::size_t g = 0; g < gallery.rows(); ++g)
      scores(q, g) = dot<Real>(queries.row(q), gallery.row(g));
  return scores;
}

// Share of total |w| mass sitting on the main diagonal of W.
template <class Real>
double diagonal_mass_fraction(const MetricParamsT<Real>& params) {
  if (params.config.variant() == Variant::kCosine) return 1.0;
  double diag = 0.0, total = 0.0;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    const double a = std::abs(static_cast<double>(params.weights[k]));
    const auto e = support_entry(params.config, k);
    total += a;
    if (e.row == e.col) diag += a;
  }
  return total > 0.0 ? diag / total : 0.0;
}

}  // namespace blockmetric

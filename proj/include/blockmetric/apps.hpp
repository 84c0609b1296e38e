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
#include <string>
#include <string_view>
#include <vector>

#include "blockmetric/errors.hpp"
#include "blockmetric/matrix.hpp"
#include "blockmetric/metric.hpp"

namespace blockmetric {

// Token-wise alignment pooling: take the max over one token set, then
// fuse the maxima by mean (MaxAve), sum (MaxSum) or a softmax-weighted
// mean (MaxSoft).
enum class AlignmentKind { kMaxAve, kMaxSum, kMaxSoft };

AlignmentKind parse_alignment(std::string_view name);  // maxave | maxsum | maxsoft

struct AlignmentStrategy {
  AlignmentKind kind = AlignmentKind::kMaxAve;
  double temperature = 0.1;  // MaxSoft only
};

template <class Real>
struct AlignmentScore {
  Real column_pass = Real(0);  // max over A for each B token, fused over B
  Real row_pass = Real(0);     // max over B for each A token, fused over A
  Real combined = Real(0);     // mean of the two passes
};

namespace detail {

template <class Real>
Real fuse_maxima(const std::vector<Real>& maxima, const AlignmentStrategy& strategy) {
  Real sum = Real(0);
  for (Real m : maxima) sum += m;
  switch (strategy.kind) {
    case AlignmentKind::kMaxAve:
      return sum / static_cast<Real>(maxima.size());
    case AlignmentKind::kMaxSum:
      return sum;
    case AlignmentKind::kMaxSoft: {
      const Real inv_t = static_cast<Real>(1.0 / strategy.temperature);
      const Real top = *std::max_element(maxima.begin(), maxima.end());
      Real z = Real(0), acc = Real(0);
      for (Real m : maxima) {
        const Real e = std::exp((m - top) * inv_t);
        z += e;
        acc += e * m;
      }
      return acc / z;
    }
  }
  return Real(0);
}

template <class Real>
void softmax_rows_inplace(Matrix<Real>& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const Real top = *std::max_element(row.begin(), row.end());
    Real z = Real(0);
    for (auto& v : row) {
      v = std::exp(v - top);
      z += v;
    }
    for (auto& v : row) v /= z;
  }
}

}  // namespace detail

template <class Real>
AlignmentScore<Real> token_alignment(const FeatureMatrixT<Real>& a, const FeatureMatrixT<Real>& b,
                                     const MetricParamsT<Real>& params,
                                     const AlignmentStrategy& strategy) {
  if (a.rows() == 0 || b.rows() == 0) throw ConfigError("token_alignment: empty token set");
  if (strategy.kind == AlignmentKind::kMaxSoft && !(strategy.temperature > 0.0)) {
    throw ConfigError("token_alignment: MaxSoft temperature must be positive");
  }
  const auto m = score_matrix(a, b, params);
  std::vector<Real> col_max(m.cols()), row_max(m.rows());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    Real best = m(0, j);
    for (std::size_t i = 1; i < m.rows(); ++i) best = std::max(best, m(i, j));
    col_max[j] = best;
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    row_max[i] = *std::max_element(row.begin(), row.end());
  }
  AlignmentScore<Real> out;
  out.column_pass = detail::fuse_maxima(col_max, strategy);
  out.row_pass = detail::fuse_maxima(row_max, strategy);
  out.combined = (out.column_pass + out.row_pass) / Real(2);
  return out;
}

template <class Real>
Real token_alignment_score(const FeatureMatrixT<Real>& a, const FeatureMatrixT<Real>& b,
                           const MetricParamsT<Real>& params, const AlignmentStrategy& strategy) {
  return token_alignment(a, b, params, strategy).combined;
}

// row_softmax(score_matrix(Q, K) / temperature) * V.
template <class Real>
Matrix<Real> metric_attention(const FeatureMatrixT<Real>& queries,
                              const FeatureMatrixT<Real>& keys, const Matrix<Real>& values,
                              const MetricParamsT<Real>& params, Real temperature) {
  if (!(temperature > Real(0))) throw ConfigError("metric_attention: temperature must be positive");
  if (values.rows() != keys.rows()) {
    throw ConfigError("metric_attention: " + std::to_string(keys.rows()) + " keys but " +
                      std::to_string(values.rows()) + " value rows");
  }
  if (keys.rows() == 0) throw ConfigError("metric_attention: no keys");
  auto weights = score_matrix(queries, keys, params);
  for (auto& v : weights.data()) v /= temperature;
  detail::softmax_rows_inplace(weights);
  Matrix<Real> out(queries.rows(), values.cols());
  for (std::size_t q = 0; q < queries.rows(); ++q)
    for (std::size_t k = 0; k < keys.rows(); ++k) {
      const Real a = weights(q, k);
      for (std::size_t c = 0; c < values.cols(); ++c) out(q, c) += a * values(k, c);
    }
  return out;
}

// Temperature defaults to sqrt(D).
template <class Real>
Matrix<Real> metric_attention(const FeatureMatrixT<Real>& queries,
                              const FeatureMatrixT<Real>& keys, const Matrix<Real>& values,
                              const MetricParamsT<Real>& params) {
  return metric_attention(queries, keys, values, params,
                          static_cast<Real>(std::sqrt(static_cast<double>(params.dim()))));
}

// Forward KL from the teacher's softened similarity distribution to the
// student's, averaged over rows, then averaged with the same quantity
// over columns.
template <class Real>
Real distill_kl(const SimilarityMatrixT<Real>& teacher, const SimilarityMatrixT<Real>& student,
                Real temperature) {
  if (!(temperature > Real(0))) throw ConfigError("distill: temperature must be positive");
  if (teacher.rows() != student.rows() || teacher.cols() != student.cols()) {
    throw ConfigError("distill: teacher and student score matrices differ in shape");
  }
  if (teacher.empty()) throw ConfigError("distill: empty score matrices");
  auto log_softmax = [&](const std::vector<Real>& line) {
    const Real top = *std::max_element(line.begin(), line.end());
    Real z = Real(0);
    for (Real v : line) z += std::exp((v - top) / temperature);
    const Real lse = std::log(z);
    std::vector<Real> out(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) out[i] = (line[i] - top) / temperature - lse;
    return out;
  };
  auto direction = [&](bool by_column) {
    const std::size_t lines = by_column ? teacher.cols() : teacher.rows();
    const std::size_t len = by_column ? teacher.rows() : teacher.cols();
    Real total = Real(0);
    std::vector<Real> t(len), s(len);
    for (std::size_t i = 0; i < lines; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        t[j] = by_column ? teacher(j, i) : teacher(i, j);
        s[j] = by_column ? student(j, i) : student(i, j);
      }
      const auto lt = log_softmax(t);
      const auto ls = log_softmax(s);
      Real kl = Real(0);
      for (std::size_t j = 0; j < len; ++j) kl += std::exp(lt[j]) * (lt[j] - ls[j]);
      total += kl;
    }
    return total / static_cast<Real>(lines);
  };
  return (direction(false) + direction(true)) / Real(2);
}

// task_loss + distill_kl, weighted 1:1.
template <class Real>
Real distill_loss(const SimilarityMatrixT<Real>& teacher, const SimilarityMatrixT<Real>& student,
                  Real temperature, Real task_loss) {
  return task_loss + distill_kl(teacher, student, temperature);
}

}  // namespace blockmetric

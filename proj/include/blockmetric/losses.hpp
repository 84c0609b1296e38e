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
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "blockmetric/errors.hpp"
#include "blockmetric/matrix.hpp"
#include "blockmetric/metric.hpp"

namespace blockmetric {

enum class LossKind { kTripletHardest, kInfoNCE, kCMPM, kPoly };

std::string_view to_string(LossKind kind);
// Accepts "triplet", "infonce", "cmpm", "poly".
LossKind parse_loss(std::string_view name);

struct LossSpec {
  LossKind kind = LossKind::kTripletHardest;
  double margin = 0.2;        // triplet and poly hinge margin
  double temperature = 0.05;  // InfoNCE
  int poly_order = 2;         // k in clip(s, 0, 1)^k
  double poly_scale = 1.0;
  double cmpm_epsilon = 1e-8;

  // Throws ConfigError on margin < 0, temperature <= 0, poly_order < 0.
  void validate() const;
};

// dL/dW restricted to the mask support, in the storage order of
// MetricParamsT::weights.
template <class Real>
struct MaskedGradientT {
  MetricConfig config;
  std::vector<Real> values;

  static MaskedGradientT zeros(const MetricConfig& cfg) {
    return {cfg, std::vector<Real>(param_count(cfg), Real(0))};
  }
};

using MaskedGradient = MaskedGradientT<float>;
using MaskedGradient64 = MaskedGradientT<double>;

// Loss value together with dL/dS for the score grid it was computed on.
template <class Real>
struct LossAndGrad {
  Real value = Real(0);
  Matrix<Real> d_scores;
};

namespace detail {

template <class Real>
void require_square(const Matrix<Real>& s, std::size_t min_size, const char* what) {
  if (s.rows() != s.cols()) {
    throw ConfigError(std::string(what) + ": score matrix must be square, got " +
                      std::to_string(s.rows()) + "x" + std::to_string(s.cols()));
  }
  if (s.rows() < min_size) {
    throw ConfigError(std::string(what) + ": batch size " + std::to_string(s.rows()) +
                      " below minimum " + std::to_string(min_size));
  }
}

// Index of the largest off-diagonal entry in row i (or column i when
// `by_column`). Ties go to the lowest index.
template <class Real>
std::size_t hardest_negative(const Matrix<Real>& s, std::size_t i, bool by_column) {
  const std::size_t n = s.rows();
  std::size_t best = (i == 0) ? 1 : 0;
  Real best_val = by_column ? s(best, i) : s(i, best);
  for (std::size_t j = best + 1; j < n; ++j) {
    if (j == i) continue;
    const Real v = by_column ? s(j, i) : s(i, j);
    if (v > best_val) {
      best_val = v;
      best = j;
    }
  }
  return best;
}

// Softmax of `logits` (already divided by any temperature) into `out`;
// returns log-sum-exp.
template <class Real>
Real softmax_into(const std::vector<Real>& logits, std::vector<Real>& out) {
  const Real mx = *std::max_element(logits.begin(), logits.end());
  Real sum = Real(0);
  out.resize(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - mx);
    sum += out[j];
  }
  for (auto& v : out) v /= sum;
  return mx + std::log(sum);
}

template <class Real>
std::vector<Real> line(const Matrix<Real>& s, std::size_t i, bool by_column, Real scale) {
  const std::size_t n = by_column ? s.rows() : s.cols();
  std::vector<Real> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = (by_column ? s(j, i) : s(i, j)) * scale;
  return v;
}

template <class Real>
Real poly_weight(Real s, int order) {
  const Real c = std::clamp(s, Real(0), Real(1));
  return order == 0 ? Real(1) : static_cast<Real>(std::pow(c, order));
}

template <class Real>
Real poly_weight_slope(Real s, int order) {
  if (order == 0 || s <= Real(0) || s >= Real(1)) return Real(0);
  return static_cast<Real>(order * std::pow(s, order - 1));
}

}  // namespace detail

// Hardest-negative hinge summed over rows (x -> y) and columns (y -> x).
// Positives sit on the diagonal. The indicator 1(l >= 0) marks a hinge as
// active, so d_scores is non-zero at l == 0 even though the value is 0.
template <class Real>
LossAndGrad<Real> triplet_hardest(const SimilarityMatrixT<Real>& s, Real margin) {
  detail::require_square(s, 2, "triplet_hardest_loss");
  const std::size_t n = s.rows();
  LossAndGrad<Real> out{Real(0), Matrix<Real>(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = detail::hardest_negative(s, i, false);
    const Real l = margin + s(i, j) - s(i, i);
    if (l >= Real(0)) {
      out.value += l;
      out.d_scores(i, j) += Real(1);
      out.d_scores(i, i) -= Real(1);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = detail::hardest_negative(s, j, true);
    const Real l = margin + s(i, j) - s(j, j);
    if (l >= Real(0)) {
      out.value += l;
      out.d_scores(i, j) += Real(1);
      out.d_scores(j, j) -= Real(1);
    }
  }
  return out;
}

template <class Real>
Real triplet_hardest_loss(const SimilarityMatrixT<Real>& s, Real margin) {
  return triplet_hardest(s, margin).value;
}

// Symmetric cross-entropy over rows and columns of S / tau, averaged over
// 2B terms.
template <class Real>
LossAndGrad<Real> infonce(const SimilarityMatrixT<Real>& s, Real temperature) {
  if (!(temperature > Real(0))) throw ConfigError("infonce: temperature must be positive");
  detail::require_square(s, 1, "infonce_loss");
  const std::size_t n = s.rows();
  LossAndGrad<Real> out{Real(0), Matrix<Real>(n, n)};
  const Real inv_t = Real(1) / temperature;
  const Real norm = Real(1) / (Real(2) * static_cast<Real>(n));
  std::vector<Real> prob;
  for (int pass = 0; pass < 2; ++pass) {
    const bool by_column = pass == 1;
    for (std::size_t i = 0; i < n; ++i) {
      const auto logits = detail::line(s, i, by_column, inv_t);
      const Real lse = detail::softmax_into(logits, prob);
      out.value += norm * (lse - logits[i]);
      for (std::size_t j = 0; j < n; ++j) {
        const Real g = norm * inv_t * (prob[j] - (j == i ? Real(1) : Real(0)));
        if (by_column) out.d_scores(j, i) += g; else out.d_scores(i, j) += g;
      }
    }
  }
  return out;
}

template <class Real>
Real infonce_loss(const SimilarityMatrixT<Real>& s, Real temperature) {
  return infonce(s, temperature).value;
}

// Sum over rows and columns of KL(p || q), p the one-hot label line and
// q = softmax of the score line. Epsilon is added to both p and q inside
// the log, so each line contributes log((1 + eps) / (q_ii + eps)) >= 0.
template <class Real>
LossAndGrad<Real> cmpm(const SimilarityMatrixT<Real>& s, Real epsilon = Real(1e-8)) {
  detail::require_square(s, 1, "cmpm_loss");
  const std::size_t n = s.rows();
  LossAndGrad<Real> out{Real(0), Matrix<Real>(n, n)};
  std::vector<Real> prob;
  for (int pass = 0; pass < 2; ++pass) {
    const bool by_column = pass == 1;
    for (std::size_t i = 0; i < n; ++i) {
      detail::softmax_into(detail::line(s, i, by_column, Real(1)), prob);
      const Real qii = prob[i];
      out.value += std::log((Real(1) + epsilon) / (qii + epsilon));
      const Real coef = -qii / (qii + epsilon);
      for (std::size_t j = 0; j < n; ++j) {
        const Real g = coef * ((j == i ? Real(1) : Real(0)) - prob[j]);
        if (by_column) out.d_scores(j, i) += g; else out.d_scores(i, j) += g;
      }
    }
  }
  return out;
}

template <class Real>
Real cmpm_loss(const SimilarityMatrixT<Real>& s, Real epsilon = Real(1e-8)) {
  return cmpm(s, epsilon).value;
}

// Every negative contributes scale * clip(s_neg, 0, 1)^k * [margin + s_neg - s_pos]_+,
// over rows and over columns. k == 0 is the plain all-negatives hinge sum.
template <class Real>
LossAndGrad<Real> poly(const SimilarityMatrixT<Real>& s, const LossSpec& spec) {
  detail::require_square(s, 2, "poly_loss");
  const std::size_t n = s.rows();
  const Real margin = static_cast<Real>(spec.margin);
  const Real scale = static_cast<Real>(spec.poly_scale);
  const int k = spec.poly_order;
  LossAndGrad<Real> out{Real(0), Matrix<Real>(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const Real neg = s(i, j);
      const Real w = detail::poly_weight(neg, k);
      const Real slope = detail::poly_weight_slope(neg, k);
      // row anchor i, positive s(i,i); column anchor j, positive s(j,j)
      for (const std::size_t pos : {i, j}) {
        const Real h = margin + neg - s(pos, pos);
        if (h > Real(0)) {
          out.value += scale * w * h;
          out.d_scores(i, j) += scale * (slope * h + w);
          out.d_scores(pos, pos) -= scale * w;
        }
      }
    }
  }
  return out;
}

template <class Real>
Real poly_loss(const SimilarityMatrixT<Real>& s, const LossSpec& spec) {
  return poly(s, spec).value;
}

template <class Real>
LossAndGrad<Real> loss_and_grad(const SimilarityMatrixT<Real>& s, const LossSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LossKind::kTripletHardest:
      return triplet_hardest(s, static_cast<Real>(spec.margin));
    case LossKind::kInfoNCE:
      return infonce(s, static_cast<Real>(spec.temperature));
    case LossKind::kCMPM:
      return cmpm(s, static_cast<Real>(spec.cmpm_epsilon));
    case LossKind::kPoly:
      return poly(s, spec);
  }
  throw ConfigError("unknown loss kind");
}

template <class Real>
Real loss_value(const SimilarityMatrixT<Real>& s, const LossSpec& spec) {
  return loss_and_grad(s, spec).value;
}

// Distance from S to the nearest point where `spec`'s loss is not
// differentiable (hinge boundaries, hardest-negative switches, clip
// corners). Smooth losses return +inf.
template <class Real>
double kink_distance(const SimilarityMatrixT<Real>& s, const LossSpec& spec) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = s.rows();
  auto consider = [&](double v) { best = std::min(best, std::abs(v)); };
  if (spec.kind == LossKind::kTripletHardest) {
    for (int pass = 0; pass < 2; ++pass) {
      const bool by_column = pass == 1;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = detail::hardest_negative(s, i, by_column);
        const double top = by_column ? s(j, i) : s(i, j);
        consider(spec.margin + top - s(i, i));
        for (std::size_t o = 0; o < n; ++o) {
          if (o == i || o == j) continue;
          consider(top - (by_column ? s(o, i) : s(i, o)));
        }
      }
    }
  } else if (spec.kind == LossKind::kPoly) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        consider(spec.margin + s(i, j) - s(i, i));
        consider(spec.margin + s(i, j) - s(j, j));
        if (spec.poly_order >= 1) {
          consider(s(i, j));
          consider(s(i, j) - 1.0);
        }
      }
    }
  }
  return best;
}

// Chain rule through the bilinear form:
//   dL/dW = sum_{q,g} dS[q][g] * (x_q y_g^T o U)
// evaluated as Z = dS * Y, then sum_q x_q[r] Z[q][c] for each stored (r, c).
template <class Real>
MaskedGradientT<Real> grad_w_from_dS(const FeatureMatrixT<Real>& x,
                                     const FeatureMatrixT<Real>& y,
                                     const Matrix<Real>& d_scores,
                                     const MetricConfig& config) {
  detail::check_dim(x.dim(), config.dim(), "grad_w_from_dS x");
  detail::check_dim(y.dim(), config.dim(), "grad_w_from_dS y");
  if (d_scores.rows() != x.rows() || d_scores.cols() != y.rows()) {
    throw ConfigError("grad_w_from_dS: dS shape does not match the score matrix");
  }
  auto grad = MaskedGradientT<Real>::zeros(config);
  if (grad.values.empty()) return grad;
  const std::size_t dim = config.dim();
  Matrix<Real> z(x.rows(), dim);
  for (std::size_t q = 0; q < x.rows(); ++q) {
    for (std::size_t g = 0; g < y.rows(); ++g) {
      const Real coef = d_scores(q, g);
      if (coef == Real(0)) continue;
      const auto yg = y.row(g);
      for (std::size_t c = 0; c < dim; ++c) z(q, c) += coef * yg[c];
    }
  }
  for (std::size_t k = 0; k < grad.values.size(); ++k) {
    const auto e = support_entry(config, k);
    Real acc = Real(0);
    for (std::size_t q = 0; q < x.rows(); ++q) acc += x.values(q, e.row) * z(q, e.col);
    grad.values[k] = acc;
  }
  return grad;
}

// Direct form of the hard-triplet weight gradient: for every active row
// hinge x_i (y_hard - y_i)^T o U, for every active column hinge
// (x_hard - x_j) y_j^T o U.
template <class Real>
MaskedGradientT<Real> triplet_grad_w(const FeatureMatrixT<Real>& x,
                                     const FeatureMatrixT<Real>& y,
                                     const MetricParamsT<Real>& params, Real margin) {
  if (x.rows() != y.rows()) throw ConfigError("triplet_grad_w: unmatched batch sizes");
  const auto s = score_matrix(x, y, params);
  detail::require_square(s, 2, "triplet_grad_w");
  const std::size_t n = s.rows();
  auto grad = MaskedGradientT<Real>::zeros(params.config);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = detail::hardest_negative(s, i, false);
    if (margin + s(i, j) - s(i, i) < Real(0)) continue;
    const auto anchor = x.row(i), pos = y.row(i), neg = y.row(j);
    for (std::size_t k = 0; k < grad.values.size(); ++k) {
      const auto e = support_entry(params.config, k);
      grad.values[k] += anchor[e.row] * (neg[e.col] - pos[e.col]);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = detail::hardest_negative(s, j, true);
    if (margin + s(i, j) - s(j, j) < Real(0)) continue;
    const auto anchor = y.row(j), pos = x.row(j), neg = x.row(i);
    for (std::size_t k = 0; k < grad.values.size(); ++k) {
      const auto e = support_entry(params.config, k);
      grad.values[k] += (neg[e.row] - pos[e.row]) * anchor[e.col];
    }
  }
  return grad;
}

// Loss + masked gradient of `spec` on a batch of matched pairs.
template <class Real>
std::pair<Real, MaskedGradientT<Real>> batch_loss_and_grad(const FeatureMatrixT<Real>& x,
                                                           const FeatureMatrixT<Real>& y,
                                                           const MetricParamsT<Real>& params,
                                                           const LossSpec& spec) {
  const auto s = score_matrix(x, y, params);
  auto lg = loss_and_grad(s, spec);
  return {lg.value, grad_w_from_dS(x, y, lg.d_scores, params.config)};
}

// Central differences (L(w + h) - L(w - h)) / 2h for every stored weight.
// Throws NumericError when the loss is non-finite at a perturbed point.
template <class Real>
MaskedGradientT<Real> finite_diff_grad(
    const std::function<Real(const MetricParamsT<Real>&)>& loss_fn,
    const MetricParamsT<Real>& params, Real step = Real(1e-5)) {
  if (!(step > Real(0))) throw ConfigError("finite_diff_grad: step must be positive");
  auto grad = MaskedGradientT<Real>::zeros(params.config);
  MetricParamsT<Real> probe = params;
  for (std::size_t k = 0; k < probe.weights.size(); ++k) {
    const Real saved = probe.weights[k];
    probe.weights[k] = saved + step;
    const Real up = loss_fn(probe);
    probe.weights[k] = saved - step;
    const Real down = loss_fn(probe);
    probe.weights[k] = saved;
    if (!std::isfinite(static_cast<double>(up)) || !std::isfinite(static_cast<double>(down))) {
      throw NumericError("finite_diff_grad: non-finite loss at perturbed weight " +
                         std::to_string(k));
    }
    grad.values[k] = (up - down) / (Real(2) * step);
  }
  return grad;
}

template <class Real>
MaskedGradientT<Real> finite_diff_grad(const LossSpec& spec, const FeatureMatrixT<Real>& x,
                                       const FeatureMatrixT<Real>& y,
                                       const MetricParamsT<Real>& params,
                                       Real step = Real(1e-5)) {
  return finite_diff_grad<Real>(
      [&](const MetricParamsT<Real>& p) { return loss_value(score_matrix(x, y, p), spec); },
      params, step);
}

// max_k |a_k - b_k| / max(|a_k|, |b_k|, floor).
template <class Real>
double max_relative_error(const MaskedGradientT<Real>& a, const MaskedGradientT<Real>& b,
                          double floor = 1e-4) {
  if (a.values.size() != b.values.size()) {
    throw ConfigError("max_relative_error: gradient layouts differ");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    const double av = a.values[k], bv = b.values[k];
    const double denom = std::max({std::abs(av), std::abs(bv), floor});
    worst = std::max(worst, std::abs(av - bv) / denom);
  }
  return worst;
}

}  // namespace blockmetric

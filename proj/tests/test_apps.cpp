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

#include <doctest.h>

#include <cmath>
#include <vector>

#include "blockmetric/apps.hpp"
#include "blockmetric/prng.hpp"

using namespace blockmetric;

namespace {

template <class Real>
FeatureMatrixT<Real> unit_tokens(std::size_t rows, std::size_t dim, Pcg32& rng) {
  Matrix<Real> m(rows, dim);
  for (auto& v : m.data()) v = static_cast<Real>(rng.gaussian());
  return normalize_rows(m);
}

// softmax(Q K^T / t) V written out in double with the plain dot product.
Matrix<double> attention_oracle(const Matrix<double>& q, const Matrix<double>& k,
                                const Matrix<double>& v, double t,
                                const std::vector<double>* diag = nullptr) {
  Matrix<double> out(q.rows(), v.cols());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    std::vector<double> logits(k.rows());
    double top = -1e300;
    for (std::size_t j = 0; j < k.rows(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) s += q(i, c) * (diag ? (*diag)[c] : 1.0) * k(j, c);
      logits[j] = s / t;
      top = std::max(top, logits[j]);
    }
    double z = 0.0;
    for (auto& l : logits) z += (l = std::exp(l - top));
    for (std::size_t j = 0; j < k.rows(); ++j)
      for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) += logits[j] / z * v(j, c);
  }
  return out;
}

}  // namespace

TEST_CASE("alignment parsing") {
  CHECK(parse_alignment("maxave") == AlignmentKind::kMaxAve);
  CHECK(parse_alignment("maxsum") == AlignmentKind::kMaxSum);
  CHECK(parse_alignment("maxsoft") == AlignmentKind::kMaxSoft);
  CHECK_THROWS_AS(parse_alignment("mean"), ConfigError);
}

TEST_CASE("alignment on an identity token grid") {
  const FeatureMatrix64 eye{Matrix<double>::identity(3), true};
  const auto cosine = init_identity<double>(MetricConfig::cosine(3));
  CHECK(token_alignment_score(eye, eye, cosine, {AlignmentKind::kMaxAve}) == 1.0);
  CHECK(token_alignment_score(eye, eye, cosine, {AlignmentKind::kMaxSum}) == 3.0);
  CHECK(token_alignment_score(eye, eye, cosine, {AlignmentKind::kMaxSoft, 0.1}) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("alignment algebra on random token sets") {
  Pcg32 rng(14);
  const auto cfg = MetricConfig::block_diag(16, 4);
  auto params = init_identity<double>(cfg);
  for (auto& w : params.weights) w += 0.2 * rng.gaussian();
  for (int t = 0; t < 20; ++t) {
    const auto a = unit_tokens<double>(4 + t % 3, 16, rng);
    const auto b = unit_tokens<double>(6, 16, rng);
    const auto ave = token_alignment(a, b, params, {AlignmentKind::kMaxAve});
    const auto sum = token_alignment(a, b, params, {AlignmentKind::kMaxSum});
    const double tb = static_cast<double>(b.rows()), ta = static_cast<double>(a.rows());
    CHECK(ave.column_pass == sum.column_pass / tb);
    CHECK(ave.row_pass == sum.row_pass / ta);
    // T * (s / T) may differ from s by one rounding
    CHECK(std::abs(tb * ave.column_pass - sum.column_pass) <= 1e-15 * std::abs(sum.column_pass));
    CHECK(std::abs(ta * ave.row_pass - sum.row_pass) <= 1e-15 * std::abs(sum.row_pass));
    const auto soft = token_alignment(a, b, params, {AlignmentKind::kMaxSoft, 100.0});
    CHECK(std::abs(soft.combined - ave.combined) < 1e-3);
    CHECK(ave.combined == (ave.column_pass + ave.row_pass) / 2.0);
  }
}

TEST_CASE("single-token sets reduce to score_pair") {
  Pcg32 rng(2);
  auto params = init_identity<float>(MetricConfig::dense(8));
  for (auto& w : params.weights) w += static_cast<float>(0.3 * rng.gaussian());
  const auto a = unit_tokens<float>(1, 8, rng);
  const auto b = unit_tokens<float>(1, 8, rng);
  const float direct = score_pair<float>(a.row(0), b.row(0), params);
  for (const auto kind : {AlignmentKind::kMaxAve, AlignmentKind::kMaxSum, AlignmentKind::kMaxSoft})
    CHECK(token_alignment_score(a, b, params, {kind, 0.1}) == direct);
}

TEST_CASE("alignment rejects bad input") {
  const auto cosine = init_identity<double>(MetricConfig::cosine(3));
  const FeatureMatrix64 eye{Matrix<double>::identity(3), true};
  const FeatureMatrix64 empty{Matrix<double>(0, 3), true};
  CHECK_THROWS_AS(token_alignment(empty, eye, cosine, {}), ConfigError);
  CHECK_THROWS_AS(token_alignment(eye, eye, cosine, {AlignmentKind::kMaxSoft, 0.0}), ConfigError);
}

TEST_CASE("raising a directional max never lowers MaxAve or MaxSum") {
  // diag weights scale single entries of M when tokens are basis vectors
  const FeatureMatrix64 a{Matrix<double>::identity(4), true};
  const FeatureMatrix64 b{Matrix<double>::identity(4), true};
  auto params = init_identity<double>(MetricConfig::diag(4));
  const auto before = token_alignment(a, b, params, {AlignmentKind::kMaxSum});
  params.weights[2] = 1.5;
  const auto after = token_alignment(a, b, params, {AlignmentKind::kMaxSum});
  CHECK(after.combined > before.combined);
  CHECK(token_alignment(a, b, params, {AlignmentKind::kMaxAve}).combined >=
        token_alignment(a, b, init_identity<double>(MetricConfig::diag(4)),
                        {AlignmentKind::kMaxAve}).combined);
}

TEST_CASE("identity attention is scaled dot-product attention") {
  Pcg32 rng(31);
  const auto q = unit_tokens<float>(5, 16, rng);
  const auto k = unit_tokens<float>(7, 16, rng);
  Matrix<float> v(7, 16);
  for (auto& x : v.data()) x = static_cast<float>(rng.gaussian());
  const auto oracle = attention_oracle(q.values.cast<double>(), k.values.cast<double>(),
                                       v.cast<double>(), 4.0);
  for (const auto cfg : {MetricConfig::cosine(16), MetricConfig::diag(16),
                         MetricConfig::block_diag(16, 4), MetricConfig::dense(16)}) {
    const auto out = metric_attention(q, k, v, init_identity<float>(cfg));
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(std::abs(out.data()[i] - oracle.data()[i]) <= 1e-6);
  }
}

TEST_CASE("attention weights sum to one") {
  Pcg32 rng(32);
  const auto q = unit_tokens<double>(5, 16, rng);
  const auto k = unit_tokens<double>(7, 16, rng);
  auto params = init_identity<double>(MetricConfig::block_diag(16, 4));
  for (auto& w : params.weights) w += rng.gaussian();
  // with V = I the output rows are the attention weights
  const auto weights = metric_attention(q, k, Matrix<double>::identity(7), params, 0.3);
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0.0;
    for (double w : weights.row(r)) {
      CHECK(w >= 0.0);
      total += w;
    }
    CHECK(std::abs(total - 1.0) <= 1e-6);
  }
}

TEST_CASE("single key returns its value row") {
  Pcg32 rng(33);
  const auto q = unit_tokens<float>(4, 8, rng);
  const auto k = unit_tokens<float>(1, 8, rng);
  const Matrix<float> v(1, 3, {0.5f, -2.0f, 7.0f});
  const auto out = metric_attention(q, k, v, init_identity<float>(MetricConfig::diag(8)));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(out(r, c) == v(0, c));
  CHECK_THROWS_AS(metric_attention(q, k, Matrix<float>(2, 3), init_identity<float>(MetricConfig::diag(8))),
                  ConfigError);
  CHECK_THROWS_AS(metric_attention(q, k, v, init_identity<float>(MetricConfig::diag(8)), 0.0f),
                  ConfigError);
}

TEST_CASE("a dominant Diag channel steers attention") {
  Pcg32 rng(34);
  const auto q = unit_tokens<double>(3, 8, rng);
  const auto k = unit_tokens<double>(6, 8, rng);
  Matrix<double> v(6, 2);
  for (auto& x : v.data()) x = rng.gaussian();
  auto params = init_identity<double>(MetricConfig::diag(8));
  params.weights[5] = 20.0;
  const auto out = metric_attention(q, k, v, params, 1.0);
  const auto oracle = attention_oracle(q.values, k.values, v, 1.0, &params.weights);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(oracle.data()[i]).epsilon(1e-12));

  // query 0's heaviest key is the one with the largest channel-5 product
  const auto w = metric_attention(q, k, Matrix<double>::identity(6), params, 1.0);
  std::size_t best = 0, best_channel = 0;
  for (std::size_t j = 1; j < 6; ++j) {
    if (w(0, j) > w(0, best)) best = j;
    if (q.values(0, 5) * k.values(j, 5) > q.values(0, 5) * k.values(best_channel, 5)) best_channel = j;
  }
  CHECK(best == best_channel);
}

TEST_CASE("distillation") {
  Pcg32 rng(40);
  Matrix<double> s(4, 4);
  for (auto& v : s.data()) v = rng.gaussian();
  CHECK(distill_kl(s, s, 0.5) == 0.0);
  CHECK(distill_loss(s, s, 0.5, 1.25) == 1.25);

  // uniform teacher, identity student, tau 1: every line has
  // KL = ln((1 + e) / 2) - 1/2
  const double closed = std::log((1.0 + std::exp(1.0)) / 2.0) - 0.5;
  CHECK(std::abs(distill_kl(Matrix<double>(2, 2), Matrix<double>::identity(2), 1.0) - closed) <=
        1e-9);
  CHECK(std::abs(distill_loss(Matrix<double>(2, 2), Matrix<double>::identity(2), 1.0, 0.3) -
                 (0.3 + closed)) <= 1e-9);

  Matrix<double> t(4, 4), st(4, 4);
  for (auto& v : t.data()) v = rng.gaussian();
  for (auto& v : st.data()) v = rng.gaussian();
  const double base = distill_kl(t, st, 0.7);
  CHECK(base > 0.0);
  Matrix<double> t3 = t, st3 = st;
  for (auto& v : t3.data()) v *= 3.0;
  for (auto& v : st3.data()) v *= 3.0;
  CHECK(distill_kl(t3, st3, 2.1) == doctest::Approx(base).epsilon(1e-12));

  CHECK_THROWS_AS(distill_kl(t, Matrix<double>(3, 4), 1.0), ConfigError);
  CHECK_THROWS_AS(distill_kl(t, st, 0.0), ConfigError);
}

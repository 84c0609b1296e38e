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

#include "blockmetric/metric.hpp"
#include "blockmetric/prng.hpp"

using namespace blockmetric;

namespace {

std::vector<double> random_unit(std::size_t dim, Pcg32& rng) {
  std::vector<double> v(dim);
  for (auto& a : v) a = rng.gaussian();
  return l2_normalize<double>(v);
}

FeatureMatrix random_features(std::size_t rows, std::size_t dim, Pcg32& rng) {
  Matrix<float> m(rows, dim);
  for (auto& v : m.data()) v = static_cast<float>(rng.gaussian());
  return normalize_rows(m);
}

template <class Real>
MetricParamsT<Real> perturbed(const MetricConfig& cfg, Pcg32& rng, double scale = 0.5) {
  auto p = init_identity<Real>(cfg);
  for (auto& w : p.weights) w += static_cast<Real>(scale * rng.gaussian());
  return p;
}

// x^T M y in double with the expanded matrix.
double bilinear_oracle(std::span<const double> x, std::span<const double> y,
                       const Matrix<double>& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) acc += x[i] * m(i, j) * y[j];
  return acc;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS_AS(MetricConfig::block_diag(10, 3), ConfigError);
  CHECK_THROWS_AS(MetricConfig::block_diag(4, 0), ConfigError);
  CHECK_THROWS_AS(MetricConfig::block_diag(4, 8), ConfigError);
  CHECK_THROWS_AS(MetricConfig::diag(0), ConfigError);
  const auto c = MetricConfig::block_diag(12, 4);
  CHECK(c.block_count() * c.block_size() == c.dim());
  CHECK(parse_variant("bdiag") == Variant::kBlockDiag);
  CHECK_THROWS_AS(parse_variant("lowrank"), ConfigError);
}

TEST_CASE("l2_normalize") {
  const std::vector<double> a{3, 4};
  const auto na = l2_normalize<double>(a);
  CHECK(na[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(na[1] == doctest::Approx(0.8).epsilon(1e-15));

  const std::vector<double> zero{0, 0};
  const auto nz = l2_normalize<double>(zero);
  CHECK(nz[0] == 0.0);
  CHECK(nz[1] == 0.0);

  const std::vector<float> ones{1, 1, 1, 1};
  for (float v : l2_normalize<float>(ones)) CHECK(v == 0.5f);

  const std::vector<double> bad{1.0, std::nan("")};
  CHECK_THROWS_AS(l2_normalize<double>(bad), NumericError);

  Matrix<float> with_zero(2, 3);
  with_zero(0, 0) = 1.0f;
  CHECK_THROWS_AS(normalize_rows(with_zero), ConfigError);
}

TEST_CASE("score_pair worked examples") {
  const MetricParams64 diag{MetricConfig::diag(3), {1, 2, 3}};
  const std::vector<double> e1{1, 0, 0};
  CHECK(score_pair<double>(e1, e1, diag) == 1.0);

  const std::vector<double> x{0.6, 0.8, 0}, y{0.8, 0.6, 0};
  CHECK(score_pair<double>(x, y, diag) == doctest::Approx(1.44).epsilon(1e-12));

  const MetricParams64 bd{MetricConfig::block_diag(4, 2), {1, 0.5, 0, 1, 1, 0, 0.25, 1}};
  const std::vector<double> h{0.5, 0.5, 0.5, 0.5};
  CHECK(score_pair<double>(h, h, bd) == doctest::Approx(1.1875).epsilon(1e-12));
  // independent triple sum over the expanded matrix
  CHECK(bilinear_oracle(h, h, materialize_dense(bd)) == doctest::Approx(1.1875).epsilon(1e-12));

  const std::vector<double> short_vec{1, 0};
  CHECK_THROWS_AS(score_pair<double>(short_vec, e1, diag), ConfigError);
}

TEST_CASE("score_pair agrees with the expanded bilinear form") {
  Pcg32 rng(11);
  for (const auto& cfg : {MetricConfig::diag(8), MetricConfig::block_diag(8, 2),
                          MetricConfig::block_diag(8, 4), MetricConfig::dense(8)}) {
    const auto p = perturbed<double>(cfg, rng);
    const auto m = materialize_dense(p);
    for (int t = 0; t < 50; ++t) {
      const auto x = random_unit(8, rng), y = random_unit(8, rng);
      CHECK(score_pair<double>(x, y, p) == doctest::Approx(bilinear_oracle(x, y, m)).epsilon(1e-12));
    }
  }
}

TEST_CASE("identity init reduces to cosine") {
  Pcg32 rng(3);
  for (const auto& cfg : {MetricConfig::cosine(16), MetricConfig::diag(16),
                          MetricConfig::block_diag(16, 4), MetricConfig::dense(16)}) {
    const auto p = init_identity<float>(cfg);
    CHECK(materialize_dense(p) == Matrix<float>::identity(16));
    for (int t = 0; t < 1000; ++t) {
      const auto x = random_features(1, 16, rng), y = random_features(1, 16, rng);
      const double ref = dot<float>(x.row(0), y.row(0));
      CHECK(std::abs(score_pair<float>(x.row(0), y.row(0), p) - ref) <= 1e-6);
    }
  }
  CHECK(init_identity<float>(MetricConfig::diag(4)).weights == std::vector<float>{1, 1, 1, 1});
  CHECK(init_identity<float>(MetricConfig::block_diag(4, 2)).weights ==
        std::vector<float>{1, 0, 0, 1, 1, 0, 0, 1});
}

TEST_CASE("score_matrix matches pairwise scores") {
  Pcg32 rng(5);
  const auto cfg = MetricConfig::block_diag(8, 2);
  const auto p = perturbed<float>(cfg, rng);
  const auto x = random_features(4, 8, rng), y = random_features(5, 8, rng);
  const auto s = score_matrix(x, y, p);
  REQUIRE(s.rows() == 4);
  REQUIRE(s.cols() == 5);
  for (std::size_t q = 0; q < 4; ++q)
    for (std::size_t g = 0; g < 5; ++g)
      CHECK(std::abs(s(q, g) - score_pair<float>(x.row(q), y.row(g), p)) <= 1e-5);

  const auto one = score_matrix(
      FeatureMatrix{Matrix<float>(1, 8, std::vector<float>(x.row(0).begin(), x.row(0).end())), true},
      FeatureMatrix{Matrix<float>(1, 8, std::vector<float>(y.row(0).begin(), y.row(0).end())), true},
      p);
  CHECK(one(0, 0) == score_pair<float>(x.row(0), y.row(0), p));

  const FeatureMatrix basis{Matrix<float>::identity(3), true};
  CHECK(score_matrix(basis, basis, init_identity<float>(MetricConfig::cosine(3))) ==
        Matrix<float>::identity(3));

  CHECK_THROWS_AS(score_matrix(x, random_features(2, 6, rng), p), ConfigError);
}

TEST_CASE("pre_project") {
  const MetricParams64 diag{MetricConfig::diag(3), {1, 2, 3}};
  const FeatureMatrix64 x{Matrix<double>(1, 3, {0.6, 0.8, 0}), true};
  const auto left = pre_project(x, diag, ProjectionSide::kLeft);
  CHECK(left.values == Matrix<double>(1, 3, {0.6, 1.6, 0}));
  CHECK_FALSE(left.normalized);
  const std::vector<double> y{0.8, 0.6, 0};
  CHECK(dot<double>(left.row(0), y) == doctest::Approx(1.44).epsilon(1e-12));

  Pcg32 rng(17);
  const auto f = random_features(10, 8, rng);
  CHECK(pre_project(f, init_identity<float>(MetricConfig::block_diag(8, 4)), ProjectionSide::kLeft)
            .values == f.values);
  CHECK(pre_project(f, init_identity<float>(MetricConfig::dense(8)), ProjectionSide::kRight)
            .values == f.values);

  const auto cfg = MetricConfig::block_diag(8, 4);
  for (const auto& c : {cfg, MetricConfig::dense(8), MetricConfig::diag(8)}) {
    const auto p = perturbed<float>(c, rng);
    const auto xs = random_features(100, 8, rng), ys = random_features(100, 8, rng);
    const auto pl = pre_project(xs, p, ProjectionSide::kLeft);
    const auto pr = pre_project(ys, p, ProjectionSide::kRight);
    for (std::size_t i = 0; i < 100; ++i) {
      const float ref = score_pair<float>(xs.row(i), ys.row(i), p);
      CHECK(std::abs(dot<float>(pl.row(i), ys.row(i)) - ref) <= 1e-5);
      CHECK(std::abs(dot<float>(xs.row(i), pr.row(i)) - ref) <= 1e-5);
    }
  }
}

TEST_CASE("param_count") {
  CHECK(param_count(MetricConfig::cosine(1024)) == 0);
  CHECK(param_count(MetricConfig::diag(1024)) == 1024);
  CHECK(param_count(MetricConfig::block_diag(1024, 256)) == 262144);
  CHECK(param_count(MetricConfig::dense(1024)) == 1048576);
}

TEST_CASE("materialize_dense layout") {
  const MetricParams64 diag{MetricConfig::diag(3), {1, 2, 3}};
  CHECK(materialize_dense(diag) == Matrix<double>(3, 3, {1, 0, 0, 0, 2, 0, 0, 0, 3}));
  const MetricParams64 bd{MetricConfig::block_diag(4, 2), {1, 2, 3, 4, 5, 6, 7, 8}};
  CHECK(materialize_dense(bd) ==
        Matrix<double>(4, 4, {1, 2, 0, 0, 3, 4, 0, 0, 0, 0, 5, 6, 0, 0, 7, 8}));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(in_support(bd.config, r, c) == ((r < 2) == (c < 2)));
  CHECK_THROWS_AS(MetricParams64(MetricConfig::diag(3), {1, 2}), ConfigError);
}

TEST_CASE("reduction chain: bdiag d=1 is diag, bdiag d=D is dense") {
  Pcg32 rng(23);
  const auto diag = perturbed<float>(MetricConfig::diag(16), rng);
  const MetricParams bd1{MetricConfig::block_diag(16, 1), diag.weights};
  const auto dense = perturbed<float>(MetricConfig::dense(16), rng);
  const MetricParams bdd{MetricConfig::block_diag(16, 16), dense.weights};
  for (int t = 0; t < 200; ++t) {
    const auto x = random_features(1, 16, rng), y = random_features(1, 16, rng);
    CHECK(std::abs(score_pair<float>(x.row(0), y.row(0), bd1) -
                   score_pair<float>(x.row(0), y.row(0), diag)) <= 1e-6);
    CHECK(score_pair<float>(x.row(0), y.row(0), bdd) ==
          score_pair<float>(x.row(0), y.row(0), dense));
  }
}

TEST_CASE("symmetry") {
  Pcg32 rng(29);
  const auto diag = perturbed<double>(MetricConfig::diag(6), rng);
  const auto x = random_unit(6, rng), y = random_unit(6, rng);
  CHECK(score_pair<double>(x, y, diag) == score_pair<double>(y, x, diag));

  // symmetric blocks give a symmetric score, asymmetric ones do not
  const MetricParams64 sym{MetricConfig::block_diag(4, 2), {1, 0.3, 0.3, 2, 1, -0.4, -0.4, 1}};
  const std::vector<double> x4(x.begin(), x.begin() + 4), y4(y.begin(), y.begin() + 4);
  CHECK(score_pair<double>(x4, y4, sym) ==
        doctest::Approx(score_pair<double>(y4, x4, sym)).epsilon(1e-14));
  const MetricParams64 asym{MetricConfig::block_diag(4, 2), {1, 0.9, 0, 1, 1, 0, 0, 1}};
  const std::vector<double> a{1, 0, 0, 0}, b{0, 1, 0, 0};
  CHECK(score_pair<double>(a, b, asym) == doctest::Approx(0.9));
  CHECK(score_pair<double>(b, a, asym) == 0.0);
}

TEST_CASE("linearity in x") {
  Pcg32 rng(31);
  const auto p = perturbed<double>(MetricConfig::block_diag(8, 4), rng);
  std::vector<double> x(8), y(8);
  for (auto& v : x) v = rng.gaussian();
  for (auto& v : y) v = rng.gaussian();
  const double base = score_pair<double>(x, y, p);
  for (double alpha : {0.0, -1.0, 2.0}) {
    std::vector<double> ax(x);
    for (auto& v : ax) v *= alpha;
    CHECK(score_pair<double>(ax, y, p) == doctest::Approx(alpha * base).epsilon(1e-12));
  }
}

TEST_CASE("diagonal mass fraction") {
  CHECK(diagonal_mass_fraction(init_identity<float>(MetricConfig::block_diag(8, 4))) == 1.0);
  const MetricParams64 bd{MetricConfig::block_diag(2, 2), {1, 1, 1, 1}};
  CHECK(diagonal_mass_fraction(bd) == 0.5);
}

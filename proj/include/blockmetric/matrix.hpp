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

#include <cstddef>
#include <span>
#include <vector>

#include "blockmetric/errors.hpp"

namespace blockmetric {

// Dense row-major matrix. Used for features, similarity grids and
// expanded weight matrices.
template <class Real>
class Matrix {
 public:
  using value_type = Real;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real fill = Real(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<Real> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ConfigError("matrix data length does not match rows*cols");
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = Real(1);
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Real& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<Real> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const Real> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  const std::vector<Real>& values() const noexcept { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  template <class Other>
  Matrix<Other> cast() const {
    return Matrix<Other>(rows_, cols_,
                         std::vector<Other>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

// R embeddings of dimension D. `normalized` records that every row was
// passed through l2_normalize.
template <class Real>
struct FeatureMatrixT {
  Matrix<Real> values;
  bool normalized = false;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t dim() const noexcept { return values.cols(); }
  std::span<const Real> row(std::size_t r) const { return values.row(r); }

  template <class Other>
  FeatureMatrixT<Other> cast() const {
    return {values.template cast<Other>(), normalized};
  }

  friend bool operator==(const FeatureMatrixT&, const FeatureMatrixT&) = default;
};

using FeatureMatrix = FeatureMatrixT<float>;
using FeatureMatrix64 = FeatureMatrixT<double>;

// Q x G grid of scores; rows are queries, columns gallery items.
template <class Real>
using SimilarityMatrixT = Matrix<Real>;
using SimilarityMatrix = SimilarityMatrixT<float>;

}  // namespace blockmetric

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

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "blockmetric/matrix.hpp"

namespace blockmetric {

// Relevant gallery indices for each query. A query may have several
// (five captions per image), and a gallery item may serve several queries.
struct GroundTruth {
  std::vector<std::vector<std::size_t>> relevant;

  // Query i is relevant to gallery item i.
  static GroundTruth identity(std::size_t n);

  std::size_t queries() const noexcept { return relevant.size(); }
  bool is_relevant(std::size_t query, std::size_t item) const;

  // Throws ConfigError on empty sets or indices >= gallery_size.
  void validate(std::size_t gallery_size) const;

  // Gallery-to-query mapping. Gallery items no query points at get an
  // empty set.
  GroundTruth inverted(std::size_t gallery_size) const;
};

// Gallery indices per query, by descending score; equal scores keep
// ascending gallery index.
using Ranking = std::vector<std::vector<std::size_t>>;

Ranking rank_gallery(const SimilarityMatrix& scores);
Ranking rank_gallery(const SimilarityMatrixT<double>& scores);

// 100 * fraction of queries with a relevant item in the top K. K larger
// than the gallery is clamped to the gallery size.
double recall_at_k(const Ranking& rankings, const GroundTruth& gt, std::size_t k);

// Macro-averaged AP over queries, in percent.
double mean_average_precision(const Ranking& rankings, const GroundTruth& gt);

double rsum(const std::array<double, 6>& recalls);

struct DirectionReport {
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double map = 0.0;

  friend bool operator==(const DirectionReport&, const DirectionReport&) = default;
};

// x2y treats rows of the score matrix as queries, y2x its columns.
struct RetrievalReport {
  DirectionReport x2y;
  DirectionReport y2x;
  double rsum = 0.0;

  friend bool operator==(const RetrievalReport&, const RetrievalReport&) = default;
};

DirectionReport evaluate_direction(const Ranking& rankings, const GroundTruth& gt);

// Both directions. Gallery items without any relevant query are left out
// of the y2x direction.
RetrievalReport evaluate_retrieval(const SimilarityMatrix& scores, const GroundTruth& gt);

// key=value lines, fixed "%.4f":
//   x2y_r1, x2y_r5, x2y_r10, x2y_map, y2x_r1, y2x_r5, y2x_r10, y2x_map, rsum
std::string format_report(const RetrievalReport& report);
// Same keys as a two-column tab-separated table with header "metric\tvalue".
std::string format_report_table(const RetrievalReport& report);

struct SimilarityHistogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;

  std::size_t bins() const noexcept { return positive.size(); }
  double bin_center(std::size_t bin) const;
};

// Equal-width bins over [min(S), max(S)]; the maximum lands in the last
// bin. Positive pairs are the (q, g) with g in gt.relevant[q].
SimilarityHistogram similarity_histogram(const SimilarityMatrix& scores, const GroundTruth& gt,
                                         std::size_t bins);

// One line per bin: "%.6f\t%zu" (bin center, count).
std::string format_histogram(const SimilarityHistogram& hist, bool positive);

}  // namespace blockmetric

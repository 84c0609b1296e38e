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

#include "blockmetric/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "blockmetric/errors.hpp"

namespace blockmetric {

GroundTruth GroundTruth::identity(std::size_t n) {
  GroundTruth gt;
  gt.relevant.resize(n);
  for (std::size_t i = 0; i < n; ++i) gt.relevant[i] = {i};
  return gt;
}

bool GroundTruth::is_relevant(std::size_t query, std::size_t item) const {
  const auto& set = relevant[query];
  return std::find(set.begin(), set.end(), item) != set.end();
}

void GroundTruth::validate(std::size_t gallery_size) const {
  for (std::size_t q = 0; q < relevant.size(); ++q) {
    if (relevant[q].empty()) {
      throw ConfigError("ground truth for query " + std::to_string(q) + " is empty");
    }
    for (std::size_t g : relevant[q]) {
      if (g >= gallery_size) {
        throw ConfigError("ground truth index " + std::to_string(g) + " for query " +
                          std::to_string(q) + " outside gallery of " +
                          std::to_string(gallery_size));
      }
    }
  }
}

GroundTruth GroundTruth::inverted(std::size_t gallery_size) const {
  GroundTruth inv;
  inv.relevant.resize(gallery_size);
  for (std::size_t q = 0; q < relevant.size(); ++q)
    for (std::size_t g : relevant[q]) inv.relevant.at(g).push_back(q);
  return inv;
}

namespace {

template <class Real>
Ranking rank_impl(const Matrix<Real>& scores) {
  Ranking out(scores.rows());
  for (std::size_t q = 0; q < scores.rows(); ++q) {
    auto& order = out[q];
    order.resize(scores.cols());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto row = scores.row(q);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return row[a] > row[b] || (row[a] == row[b] && a < b);
    });
  }
  return out;
}

void check_shapes(const Ranking& rankings, const GroundTruth& gt) {
  if (rankings.size() != gt.queries()) {
    throw ConfigError("ranking has " + std::to_string(rankings.size()) +
                      " queries but ground truth has " + std::to_string(gt.queries()));
  }
  if (rankings.empty()) throw ConfigError("no queries to evaluate");
  for (const auto& set : gt.relevant) {
    if (set.empty()) throw ConfigError("every query needs at least one relevant item");
  }
}

}  // namespace

Ranking rank_gallery(const SimilarityMatrix& scores) { return rank_impl(scores); }
Ranking rank_gallery(const SimilarityMatrixT<double>& scores) { return rank_impl(scores); }

double recall_at_k(const Ranking& rankings, const GroundTruth& gt, std::size_t k) {
  if (k == 0) throw ConfigError("recall_at_k: K must be at least 1");
  check_shapes(rankings, gt);
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const std::size_t limit = std::min(k, rankings[q].size());
    for (std::size_t r = 0; r < limit; ++r) {
      if (gt.is_relevant(q, rankings[q][r])) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double mean_average_precision(const Ranking& rankings, const GroundTruth& gt) {
  check_shapes(rankings, gt);
  double total = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    std::size_t found = 0;
    double ap = 0.0;
    for (std::size_t r = 0; r < rankings[q].size(); ++r) {
      if (gt.is_relevant(q, rankings[q][r])) {
        ++found;
        ap += static_cast<double>(found) / static_cast<double>(r + 1);
      }
    }
    total += ap / static_cast<double>(gt.relevant[q].size());
  }
  return 100.0 * total / static_cast<double>(rankings.size());
}

double rsum(const std::array<double, 6>& recalls) {
  double s = 0.0;
  for (double r : recalls) s += r;
  return s;
}

DirectionReport evaluate_direction(const Ranking& rankings, const GroundTruth& gt) {
  return {recall_at_k(rankings, gt, 1), recall_at_k(rankings, gt, 5),
          recall_at_k(rankings, gt, 10), mean_average_precision(rankings, gt)};
}

RetrievalReport evaluate_retrieval(const SimilarityMatrix& scores, const GroundTruth& gt) {
  gt.validate(scores.cols());
  if (gt.queries() != scores.rows()) {
    throw ConfigError("ground truth covers " + std::to_string(gt.queries()) +
                      " queries, score matrix has " + std::to_string(scores.rows()));
  }
  RetrievalReport report;
  report.x2y = evaluate_direction(rank_gallery(scores), gt);

  const GroundTruth inv = gt.inverted(scores.cols());
  std::vector<std::size_t> kept;
  for (std::size_t g = 0; g < scores.cols(); ++g)
    if (!inv.relevant[g].empty()) kept.push_back(g);
  SimilarityMatrix reverse(kept.size(), scores.rows());
  GroundTruth reverse_gt;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t q = 0; q < scores.rows(); ++q) reverse(i, q) = scores(q, kept[i]);
    reverse_gt.relevant.push_back(inv.relevant[kept[i]]);
  }
  report.y2x = evaluate_direction(rank_gallery(reverse), reverse_gt);
  report.rsum = rsum({report.x2y.r1, report.x2y.r5, report.x2y.r10, report.y2x.r1,
                      report.y2x.r5, report.y2x.r10});
  return report;
}

namespace {

std::vector<std::pair<std::string, double>> report_items(const RetrievalReport& r) {
  return {{"x2y_r1", r.x2y.r1},   {"x2y_r5", r.x2y.r5},   {"x2y_r10", r.x2y.r10},
          {"x2y_map", r.x2y.map}, {"y2x_r1", r.y2x.r1},   {"y2x_r5", r.y2x.r5},
          {"y2x_r10", r.y2x.r10}, {"y2x_map", r.y2x.map}, {"rsum", r.rsum}};
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string format_report(const RetrievalReport& report) {
  std::string out;
  for (const auto& [key, value] : report_items(report)) out += key + "=" + fixed4(value) + "\n";
  return out;
}

std::string format_report_table(const RetrievalReport& report) {
  std::string out = "metric\tvalue\n";
  for (const auto& [key, value] : report_items(report)) out += key + "\t" + fixed4(value) + "\n";
  return out;
}

double SimilarityHistogram::bin_center(std::size_t bin) const {
  const double width = (hi - lo) / static_cast<double>(bins());
  return lo + (static_cast<double>(bin) + 0.5) * width;
}

SimilarityHistogram similarity_histogram(const SimilarityMatrix& scores, const GroundTruth& gt,
                                         std::size_t bins) {
  if (bins < 2) throw ConfigError("similarity_histogram: need at least 2 bins");
  if (gt.queries() != scores.rows()) {
    throw ConfigError("similarity_histogram: ground truth does not match score rows");
  }
  if (scores.empty()) throw ConfigError("similarity_histogram: empty score matrix");
  gt.validate(scores.cols());
  SimilarityHistogram h;
  const auto [mn, mx] = std::minmax_element(scores.data().begin(), scores.data().end());
  h.lo = *mn;
  h.hi = *mx;
  h.positive.assign(bins, 0);
  h.negative.assign(bins, 0);
  const double width = (h.hi - h.lo) / static_cast<double>(bins);
  for (std::size_t q = 0; q < scores.rows(); ++q) {
    for (std::size_t g = 0; g < scores.cols(); ++g) {
      std::size_t bin = 0;
      if (width > 0.0) {
        const double pos = std::floor((static_cast<double>(scores(q, g)) - h.lo) / width);
        bin = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, pos)));
      }
      (gt.is_relevant(q, g) ? h.positive : h.negative)[bin] += 1;
    }
  }
  return h;
}

std::string format_histogram(const SimilarityHistogram& hist, bool positive) {
  const auto& counts = positive ? hist.positive : hist.negative;
  std::string out;
  char buf[96];
  for (std::size_t b = 0; b < counts.size(); ++b) {
    std::snprintf(buf, sizeof(buf), "%.6f\t%zu\n", hist.bin_center(b), counts[b]);
    out += buf;
  }
  return out;
}

}  // namespace blockmetric

/*
 * Copyright 2026 The NFS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "nfs/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "nfs/errors.h"

namespace nfs {

namespace {

void CheckSameLength(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw InvalidArgument(std::string(what) + ": length mismatch (" +
                          std::to_string(a) + " vs " + std::to_string(b) + ")");
}

// Number of tied pairs n_t(n_t-1)/2 summed over runs of equal values in a
// sorted range, using `equal` to compare neighbours.
template <typename Equal>
std::uint64_t TiedPairs(std::size_t n, Equal equal) {
  std::uint64_t total = 0;
  std::uint64_t run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}

// Stable merge sort of `values` counting inversions (strictly decreasing
// pairs).
std::uint64_t SortCountingSwaps(std::vector<double>& values,
                                std::vector<double>& scratch) {
  const std::size_t n = values.size();
  std::uint64_t swaps = 0;
  scratch.resize(n);
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n);
      const std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (values[j] < values[i]) {
          swaps += mid - i;
          scratch[k++] = values[j++];
        } else {
          scratch[k++] = values[i++];
        }
      }
      while (i < mid) scratch[k++] = values[i++];
      while (j < hi) scratch[k++] = values[j++];
    }
    values.swap(scratch);
  }
  return swaps;
}

}  // namespace

double Gain(int label) { return std::exp2(static_cast<double>(label)) - 1.0; }

double Discount(std::size_t rank) {
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

std::vector<std::size_t> RankOrder(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

double DcgAtK(std::span<const int> labels, std::span<const double> scores,
              std::size_t k) {
  CheckSameLength(labels.size(), scores.size(), "dcg");
  const auto order = RankOrder(scores);
  double dcg = 0.0;
  for (std::size_t r = 0; r < order.size() && r < k; ++r)
    dcg += Gain(labels[order[r]]) * Discount(r + 1);
  return dcg;
}

double IdealDcgAtK(std::span<const int> labels, std::size_t k) {
  std::vector<int> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double dcg = 0.0;
  for (std::size_t r = 0; r < sorted.size() && r < k; ++r)
    dcg += Gain(sorted[r]) * Discount(r + 1);
  return dcg;
}

double NdcgAtK(std::span<const int> labels, std::span<const double> scores,
               std::size_t k) {
  CheckSameLength(labels.size(), scores.size(), "ndcg");
  if (labels.empty()) throw InvalidArgument("ndcg: empty ranking");
  if (k == 0) throw InvalidArgument("ndcg: k must be positive");
  const double ideal = IdealDcgAtK(labels, k);
  if (ideal <= 0.0) return 0.0;
  return DcgAtK(labels, scores, k) / ideal;
}

double MeanNdcgAtK(const QuerySet& qs,
                   const std::vector<std::vector<double>>& scores,
                   std::size_t k) {
  if (scores.size() != qs.queries.size())
    throw InvalidArgument("mean_ndcg: scores missing for some queries");
  double total = 0.0;
  std::size_t judged = 0;
  for (std::size_t q = 0; q < qs.queries.size(); ++q) {
    const auto& query = qs.queries[q];
    if (scores[q].size() != query.documents.size())
      throw InvalidArgument("mean_ndcg: scores missing for query " + query.qid);
    if (!query.HasRelevant()) continue;
    const auto labels = query.Labels();
    total += NdcgAtK(labels, scores[q], k);
    ++judged;
  }
  return judged == 0 ? 0.0 : total / static_cast<double>(judged);
}

double AveragePrecision(std::span<const int> labels,
                        std::span<const double> scores) {
  CheckSameLength(labels.size(), scores.size(), "map");
  const auto order = RankOrder(scores);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]] > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

Correlation KendallTau(std::span<const double> x, std::span<const double> y) {
  CheckSameLength(x.size(), y.size(), "kendall_tau");
  const std::size_t n = x.size();
  if (n < 2) throw InvalidArgument("kendall_tau: need at least 2 points");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t ties_x =
      TiedPairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b]; });
  const std::uint64_t ties_xy = TiedPairs(n, [&](std::size_t a, std::size_t b) {
    return xs[a] == xs[b] && ys[a] == ys[b];
  });
  std::vector<double> scratch;
  const std::uint64_t swaps = SortCountingSwaps(ys, scratch);
  const std::uint64_t ties_y =
      TiedPairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });

  if (ties_x == n0 || ties_y == n0) return {0.0, false};
  // concordant - discordant
  const double s = static_cast<double>(n0) - static_cast<double>(ties_x) -
                   static_cast<double>(ties_y) + static_cast<double>(ties_xy) -
                   2.0 * static_cast<double>(swaps);
  const double denom = std::sqrt(static_cast<double>(n0 - ties_x)) *
                       std::sqrt(static_cast<double>(n0 - ties_y));
  return {std::clamp(s / denom, -1.0, 1.0), true};
}

std::vector<double> AverageRanks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

Correlation Pearson(std::span<const double> x, std::span<const double> y) {
  CheckSameLength(x.size(), y.size(), "pearson");
  const std::size_t n = x.size();
  if (n < 2) throw InvalidArgument("pearson: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return {0.0, false};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), true};
}

Correlation Spearman(std::span<const double> x, std::span<const double> y) {
  CheckSameLength(x.size(), y.size(), "spearman");
  if (x.size() < 2) throw InvalidArgument("spearman: need at least 2 points");
  const auto rx = AverageRanks(x);
  const auto ry = AverageRanks(y);
  return Pearson(rx, ry);
}

}  // namespace nfs

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

// Ranking metrics and rank correlations.
//
// Ranking ties are broken by ascending original index everywhere, so every
// metric is a deterministic function of (labels, scores).

#ifndef NFS_METRICS_H_
#define NFS_METRICS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "nfs/data.h"

namespace nfs {

// Gain 2^label - 1.
double Gain(int label);
// Discount 1 / log2(rank + 1), rank 1-based.
double Discount(std::size_t rank);

// Indices sorted by descending score, ascending index on ties.
std::vector<std::size_t> RankOrder(std::span<const double> scores);

double DcgAtK(std::span<const int> labels, std::span<const double> scores,
              std::size_t k);
double IdealDcgAtK(std::span<const int> labels, std::size_t k);

// 0.0 when every label is zero.
double NdcgAtK(std::span<const int> labels, std::span<const double> scores,
               std::size_t k);

// Mean nDCG@k over queries with at least one relevant document; all-zero
// queries are excluded. Returns 0.0 when no query is judgeable.
double MeanNdcgAtK(const QuerySet& qs,
                   const std::vector<std::vector<double>>& scores,
                   std::size_t k);

// Average precision with binary relevance (label > 0).
double AveragePrecision(std::span<const int> labels,
                        std::span<const double> scores);

struct Correlation {
  double value = 0.0;
  // False when either input is constant; value is then 0.0.
  bool defined = true;
};

// Tau-b in O(n log n) (Knight's merge-sort algorithm).
Correlation KendallTau(std::span<const double> x, std::span<const double> y);

// Average ranks (ties share the mean rank), 1-based.
std::vector<double> AverageRanks(std::span<const double> x);

// Pearson correlation of average ranks.
Correlation Spearman(std::span<const double> x, std::span<const double> y);
Correlation Pearson(std::span<const double> x, std::span<const double> y);

}  // namespace nfs

#endif  // NFS_METRICS_H_

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

// Reference selectors: GAS (greedy importance vs. Kendall redundancy), HCAS
// (Spearman similarity + single linkage) and XGAS (GAS on external
// importances).

#ifndef NFS_BASELINES_H_
#define NFS_BASELINES_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nfs/data.h"
#include "nfs/parallel.h"
#include "nfs/select.h"

namespace nfs {

enum class ImportanceMetric { kNdcg, kMap };

// Mean per-query metric when ranking by feature j alone, taking the better of
// the two orientations. nDCG averages over queries with a relevant document,
// MAP likewise.
std::vector<double> SingleFeatureImportance(const QuerySet& qs, std::size_t k,
                                            ImportanceMetric metric = ImportanceMetric::kNdcg,
                                            Execution execution = Execution::kParallel);

// Column-major feature values of a uniform document subsample of at most
// `max_docs` documents pooled across queries (all documents if fewer).
std::vector<std::vector<double>> PooledColumns(const QuerySet& qs, std::size_t max_docs,
                                               std::uint64_t seed);

enum class CorrelationKind { kKendall, kSpearman };

// |correlation| between every pair of columns; undefined pairs (a constant
// column) get 0, the diagonal is 1.
SimilarityMatrix CorrelationSimilarity(const std::vector<std::vector<double>>& columns,
                                       CorrelationKind kind,
                                       Execution execution = Execution::kParallel);

// Greedy loop: take the unpicked feature with the highest current importance
// (ties to the smallest id), then subtract 2c * sim(picked, j) from every
// unpicked j. `kept` is in pick order.
SelectionResult GreedySelect(std::span<const double> importance, const SimilarityMatrix& sim,
                             std::size_t n_keep, double c);

struct BaselineConfig {
  std::size_t k = 3;
  double c = 0.01;
  std::size_t max_pooled_docs = 50000;
  std::uint64_t seed = 0;
  ImportanceMetric metric = ImportanceMetric::kNdcg;
};

SelectionResult GasSelect(const QuerySet& qs, std::size_t n_keep, const BaselineConfig& config,
                          Execution execution = Execution::kParallel);
// Representative per cluster: highest single-feature nDCG@k.
SelectionResult HcasSelect(const QuerySet& qs, std::size_t n_keep, const BaselineConfig& config,
                           Execution execution = Execution::kParallel);
SelectionResult XgasSelect(const QuerySet& qs, std::span<const double> importance,
                           std::size_t n_keep, const BaselineConfig& config,
                           Execution execution = Execution::kParallel);

// Lines `fid<TAB>value` with 1-based ids; absent ids get 0.
std::vector<double> ParseImportances(std::istream& in, std::size_t feature_count);
std::vector<double> LoadImportances(const std::string& path, std::size_t feature_count);

}  // namespace nfs

#endif  // NFS_BASELINES_H_

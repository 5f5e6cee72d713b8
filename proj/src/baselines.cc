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

#include "nfs/baselines.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

#include "nfs/errors.h"
#include "nfs/metrics.h"
#include "nfs/random.h"

namespace nfs {
namespace {

constexpr std::uint64_t kSubsampleStream = 0x5ab;

double MeanMetric(const QuerySet& qs, std::size_t feature, double sign, std::size_t k,
                  ImportanceMetric metric) {
  double total = 0.0;
  std::size_t judged = 0;
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& q : qs.queries) {
    if (!q.HasRelevant()) continue;
    scores.clear();
    labels.clear();
    for (const auto& doc : q.documents) {
      scores.push_back(sign * doc.features[feature]);
      labels.push_back(doc.label);
    }
    total += metric == ImportanceMetric::kNdcg ? NdcgAtK(labels, scores, k)
                                               : AveragePrecision(labels, scores);
    ++judged;
  }
  return judged == 0 ? 0.0 : total / static_cast<double>(judged);
}

void CheckKeep(std::size_t n_keep, std::size_t d) {
  if (n_keep == 0) throw InvalidArgument("n_keep must be positive");
  if (n_keep > d)
    throw InvalidArgument("n_keep " + std::to_string(n_keep) + " exceeds feature count " +
                          std::to_string(d));
}

}  // namespace

std::vector<double> SingleFeatureImportance(const QuerySet& qs, std::size_t k,
                                            ImportanceMetric metric, Execution execution) {
  if (qs.queries.empty()) throw InvalidArgument("single_feature_importance: empty query set");
  if (k == 0) throw InvalidArgument("single_feature_importance: k must be positive");
  std::vector<double> importance(qs.feature_count, 0.0);
  ParallelFor(qs.feature_count, execution, [&](std::size_t j) {
    importance[j] = std::max(MeanMetric(qs, j, 1.0, k, metric),
                             MeanMetric(qs, j, -1.0, k, metric));
  });
  return importance;
}

std::vector<std::vector<double>> PooledColumns(const QuerySet& qs, std::size_t max_docs,
                                               std::uint64_t seed) {
  if (max_docs == 0) throw InvalidArgument("pooled_columns: max_docs must be positive");
  std::vector<const Document*> docs;
  for (const auto& q : qs.queries)
    for (const auto& doc : q.documents) docs.push_back(&doc);
  if (docs.size() > max_docs) {
    // Partial Fisher-Yates, then restore the original order of the sample.
    std::vector<std::size_t> index(docs.size());
    std::iota(index.begin(), index.end(), std::size_t{0});
    Rng rng = MakeRng(seed, {kSubsampleStream});
    for (std::size_t i = 0; i < max_docs; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (docs.size() - i));
      std::swap(index[i], index[j]);
    }
    index.resize(max_docs);
    std::sort(index.begin(), index.end());
    std::vector<const Document*> sample;
    for (const auto i : index) sample.push_back(docs[i]);
    docs = std::move(sample);
  }
  std::vector<std::vector<double>> columns(qs.feature_count,
                                           std::vector<double>(docs.size()));
  for (std::size_t i = 0; i < docs.size(); ++i)
    for (std::size_t j = 0; j < qs.feature_count; ++j) columns[j][i] = docs[i]->features[j];
  return columns;
}

SimilarityMatrix CorrelationSimilarity(const std::vector<std::vector<double>>& columns,
                                       CorrelationKind kind, Execution execution) {
  const std::size_t d = columns.size();
  SimilarityMatrix sim(d);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < d; ++a) {
    sim.Set(a, a, 1.0);
    for (std::size_t b = a + 1; b < d; ++b) pairs.emplace_back(a, b);
  }
  // Spearman reuses per-column ranks.
  std::vector<std::vector<double>> ranks;
  if (kind == CorrelationKind::kSpearman) {
    ranks.resize(d);
    ParallelFor(d, execution, [&](std::size_t j) { ranks[j] = AverageRanks(columns[j]); });
  }
  std::vector<double> values(pairs.size(), 0.0);
  ParallelFor(pairs.size(), execution, [&](std::size_t p) {
    const auto [a, b] = pairs[p];
    const Correlation c = kind == CorrelationKind::kKendall
                              ? KendallTau(columns[a], columns[b])
                              : Pearson(ranks[a], ranks[b]);
    values[p] = c.defined ? std::min(1.0, std::fabs(c.value)) : 0.0;
  });
  for (std::size_t p = 0; p < pairs.size(); ++p) sim.Set(pairs[p].first, pairs[p].second, values[p]);
  return sim;
}

SelectionResult GreedySelect(std::span<const double> importance, const SimilarityMatrix& sim,
                             std::size_t n_keep, double c) {
  const std::size_t d = importance.size();
  if (sim.size() != d) throw InvalidArgument("greedy_select: similarity size mismatch");
  if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("greedy_select: c must be >= 0");
  CheckKeep(n_keep, d);
  std::vector<double> current(importance.begin(), importance.end());
  std::vector<bool> picked(d, false);
  SelectionResult result;
  result.frequency.assign(importance.begin(), importance.end());
  result.cluster_of.assign(d, -1);
  result.rule = "greedy";
  for (std::size_t step = 0; step < n_keep; ++step) {
    std::size_t best = d;
    for (std::size_t j = 0; j < d; ++j)
      if (!picked[j] && (best == d || current[j] > current[best])) best = j;
    picked[best] = true;
    result.kept.push_back(best);
    result.cluster_of[best] = static_cast<int>(step);
    result.clusters.push_back({best});
    for (std::size_t j = 0; j < d; ++j)
      if (!picked[j]) current[j] -= 2.0 * c * sim(best, j);
  }
  return result;
}

SelectionResult GasSelect(const QuerySet& qs, std::size_t n_keep, const BaselineConfig& config,
                          Execution execution) {
  CheckKeep(n_keep, qs.feature_count);
  const auto importance = SingleFeatureImportance(qs, config.k, config.metric, execution);
  const auto sim = CorrelationSimilarity(PooledColumns(qs, config.max_pooled_docs, config.seed),
                                         CorrelationKind::kKendall, execution);
  SelectionResult result = GreedySelect(importance, sim, n_keep, config.c);
  result.rule = "gas";
  return result;
}

SelectionResult HcasSelect(const QuerySet& qs, std::size_t n_keep, const BaselineConfig& config,
                           Execution execution) {
  CheckKeep(n_keep, qs.feature_count);
  const auto importance =
      SingleFeatureImportance(qs, config.k, ImportanceMetric::kNdcg, execution);
  const auto sim = CorrelationSimilarity(PooledColumns(qs, config.max_pooled_docs, config.seed),
                                         CorrelationKind::kSpearman, execution);
  SelectionResult result = PickRepresentatives(SingleLinkage(sim, n_keep), importance);
  result.rule = "hcas-max-ndcg";
  return result;
}

SelectionResult XgasSelect(const QuerySet& qs, std::span<const double> importance,
                           std::size_t n_keep, const BaselineConfig& config,
                           Execution execution) {
  if (importance.size() != qs.feature_count)
    throw InvalidArgument("xgas_select: " + std::to_string(importance.size()) +
                          " importances for " + std::to_string(qs.feature_count) +
                          " features");
  CheckKeep(n_keep, qs.feature_count);
  const auto sim = CorrelationSimilarity(PooledColumns(qs, config.max_pooled_docs, config.seed),
                                         CorrelationKind::kKendall, execution);
  SelectionResult result = GreedySelect(importance, sim, n_keep, config.c);
  result.rule = "xgas";
  return result;
}

std::vector<double> ParseImportances(std::istream& in, std::size_t feature_count) {
  std::vector<double> importance(feature_count, 0.0);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    long long id = 0;
    double value = 0.0;
    if (!(fields >> id >> value))
      throw DataError("importance line " + std::to_string(line_number) +
                      ": expected 'fid<TAB>value'");
    if (id < 1 || static_cast<std::size_t>(id) > feature_count)
      throw DataError("importance line " + std::to_string(line_number) + ": feature id " +
                      std::to_string(id) + " outside 1.." + std::to_string(feature_count));
    if (!std::isfinite(value) || value < 0.0)
      throw DataError("importance line " + std::to_string(line_number) +
                      ": importance must be finite and non-negative");
    importance[static_cast<std::size_t>(id - 1)] = value;
  }
  return importance;
}

std::vector<double> LoadImportances(const std::string& path, std::size_t feature_count) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open importance file " + path);
  return ParseImportances(in, feature_count);
}

}  // namespace nfs

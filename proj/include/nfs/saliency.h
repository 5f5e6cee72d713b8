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

// Input-gradient saliency maps and the salient feature groups they induce.

#ifndef NFS_SALIENCY_H_
#define NFS_SALIENCY_H_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "nfs/data.h"
#include "nfs/parallel.h"
#include "nfs/reranker.h"
#include "nfs/trainer.h"

namespace nfs {

// Normalized saliencies in [0, 1], one per feature.
struct SaliencyMap {
  std::vector<double> values;

  friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;
};

// Strictly increasing 0-based feature ids, non-empty.
using FeatureGroup = std::vector<std::size_t>;

// Distinct groups with their occurrence counts over `maps_total` maps.
struct FeatureGroupSet {
  std::map<FeatureGroup, std::size_t> groups;
  std::size_t maps_total = 0;
  std::size_t feature_count = 0;

  std::size_t TotalCount() const;
  friend bool operator==(const FeatureGroupSet&, const FeatureGroupSet&) = default;
};

// |d score(doc) / d features(doc)| for a standardized docs x d matrix.
std::vector<double> RawSaliency(const ModelParams& params,
                                const RerankerConfig& config,
                                std::span<const double> features,
                                std::size_t docs, std::size_t doc_index);

// Raw saliency of every document of one standardized query: a single
// forward graph, one reverse sweep per document.
std::vector<std::vector<double>> RawSaliencyAll(const ModelParams& params,
                                                const RerankerConfig& config,
                                                std::span<const double> features,
                                                std::size_t docs);

// (v - min) / (max - min); all zeros for a constant map.
SaliencyMap MinMaxNormalize(std::span<const double> raw);

// Normalized map of one raw (unstandardized) document, taken with respect
// to the model's standardized input. Throws NumericalError for non-finite
// parameters.
SaliencyMap ComputeSaliencyMap(const TrainedModel& model, const Query& query,
                               std::size_t doc_index);

// Features with saliency strictly above t; nullopt when none are.
std::optional<FeatureGroup> ExtractGroup(const SaliencyMap& map, double threshold);

// Maps for every document, indexed [query][doc].
std::vector<std::vector<SaliencyMap>> ComputeAllMaps(
    const TrainedModel& model, const QuerySet& qs,
    Execution execution = Execution::kParallel);

// Aggregates the extracted groups of `maps` in (query, doc) order.
FeatureGroupSet AggregateGroups(const std::vector<std::vector<SaliencyMap>>& maps,
                                std::size_t feature_count, double threshold);

FeatureGroupSet MineGroups(const TrainedModel& model, const QuerySet& qs,
                           double threshold,
                           Execution execution = Execution::kParallel);

// `qid<TAB>doc<TAB>v1,...,vd` per document, doc 0-based.
void WriteSaliencyDump(const QuerySet& qs,
                       const std::vector<std::vector<SaliencyMap>>& maps,
                       std::ostream& out);

// Comma-separated 1-based ids.
std::string FormatGroup(const FeatureGroup& group);
FeatureGroup ParseGroup(std::string_view text);

}  // namespace nfs

#endif  // NFS_SALIENCY_H_

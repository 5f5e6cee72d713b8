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

// Feature selection from mined groups: co-occurrence similarity, single
// linkage clustering, and one representative per cluster.

#ifndef NFS_SELECT_H_
#define NFS_SELECT_H_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nfs/data.h"
#include "nfs/groupmine.h"
#include "nfs/parallel.h"
#include "nfs/saliency.h"
#include "nfs/trainer.h"

namespace nfs {

class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t a, std::size_t b) const { return values_[a * n_ + b]; }
  // Sets both (a, b) and (b, a).
  void Set(std::size_t a, std::size_t b, double value) {
    values_[a * n_ + b] = value;
    values_[b * n_ + a] = value;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

// Count-weighted co-occurrence statistics of a group set.
struct Cooccurrence {
  std::vector<double> appearances;  // app(a)
  SimilarityMatrix together;        // co(a, b); diagonal = app(a)
};

Cooccurrence CountCooccurrence(const FeatureGroupSet& groups);

// Weighted Jaccard: co(a,b) / (app(a) + app(b) - co(a,b)). Features in no
// group have similarity 0 to everything (including themselves); active
// features have 1 on the diagonal.
SimilarityMatrix GroupSimilarity(const FeatureGroupSet& groups);

// Features appearing in at least one group, ascending.
std::vector<std::size_t> ActiveFeatures(const FeatureGroupSet& groups);

// Clusters with ascending members, ordered by smallest member.
using Partition = std::vector<std::vector<std::size_t>>;

// Agglomerates `active` features until `n_clusters` remain, always merging
// the pair of clusters with the largest maximum pairwise similarity; ties go
// to the pair with the smallest (min id of first, min id of second).
Partition SingleLinkage(const SimilarityMatrix& sim, std::span<const std::size_t> active,
                        std::size_t n_clusters);
Partition SingleLinkage(const SimilarityMatrix& sim, std::size_t n_clusters);

struct SelectionResult {
  // Selected 0-based features. NFS and HCAS keep them ascending; the greedy
  // selectors keep pick order.
  std::vector<std::size_t> kept;
  Partition clusters;
  // Per-feature score the representative rule used (group frequency for NFS,
  // importance for the baselines), length feature_count.
  std::vector<double> frequency;
  // Cluster index per feature, -1 for features outside every cluster.
  std::vector<int> cluster_of;
  std::string rule;
  std::vector<std::string> warnings;
};

// Highest `frequency` per cluster, ties to the smallest id; kept ascending.
SelectionResult PickRepresentatives(const Partition& partition,
                                    std::span<const double> frequency);

struct NfsConfig {
  RerankerConfig reranker;
  TrainConfig train;
  NullModelConfig null_model;
  std::size_t n_keep = 1;
};

struct NfsResult {
  SelectionResult selection;
  TrainedModel model;
  std::vector<EpochRecord> history;
  FeatureGroupSet mined;
  PruneResult pruned;
};

// Clustering and representative choice on an already pruned group set.
SelectionResult SelectFromGroups(const FeatureGroupSet& survivors, std::size_t n_keep);

// Train, mine, prune, cluster, pick. `valid` only drives the training log.
NfsResult NfsSelect(const QuerySet& train, const QuerySet& valid, const NfsConfig& config,
                    Execution execution = Execution::kParallel);

// One 1-based id per line, ascending.
void WriteFeatureList(std::span<const std::size_t> features, std::ostream& out);
std::vector<std::size_t> ReadFeatureList(std::istream& in);

// Cluster membership and frequencies, one line per feature.
void WriteSelectionReport(const SelectionResult& result, std::ostream& out);

}  // namespace nfs

#endif  // NFS_SELECT_H_

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

// Null-model significance filter for mined feature groups.
//
// A random saliency map marks each feature salient independently with
// probability 1 - t, so a fixed group g of size s is the exact salient set
// of a random map with probability (1 - t)^s * t^(d - s). A real group is
// kept only if its count is rarely matched or beaten by its counts in K
// random datasets of the same size.

#ifndef NFS_GROUPMINE_H_
#define NFS_GROUPMINE_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nfs/parallel.h"
#include "nfs/saliency.h"

namespace nfs {

struct NullModelConfig {
  std::size_t datasets = 5000;  // K
  double threshold = 0.95;      // t
  // Pruning fraction; a group with more than alpha * K exceedances is noise.
  double alpha = 0.02;
  std::uint64_t seed = 0;

  void Validate() const;
};

enum class NullSampling {
  // Per-dataset match counts drawn from binomial(maps, p_g).
  kBinomial,
  // Every random map materialized feature by feature. Slow; kept to
  // cross-check kBinomial.
  kLiteral,
};

// Probability that a random map's salient set is exactly a given group.
double GroupMatchProbability(std::size_t feature_count, std::size_t group_size,
                             double threshold);

// counts[target][k] = matches of targets[target] in random dataset k.
std::vector<std::vector<std::size_t>> RandomGroupFrequencies(
    std::size_t feature_count, std::size_t maps_per_dataset, std::size_t datasets,
    double threshold, std::uint64_t seed, const std::vector<FeatureGroup>& targets,
    NullSampling sampling = NullSampling::kBinomial,
    Execution execution = Execution::kParallel);

struct GroupVerdict {
  FeatureGroup group;
  std::size_t count = 0;
  // Random datasets in which the group occurred at least `count` times.
  std::size_t exceedances = 0;
  bool survives = false;
};

struct PruneResult {
  FeatureGroupSet survivors;
  // One entry per input group, in group order.
  std::vector<GroupVerdict> verdicts;
};

PruneResult Prune(const FeatureGroupSet& real, const NullModelConfig& config,
                  NullSampling sampling = NullSampling::kBinomial,
                  Execution execution = Execution::kParallel);

// `members<TAB>count<TAB>exceedances`, members as 1-based ids.
void WriteGroupReport(const std::vector<GroupVerdict>& verdicts, std::ostream& out,
                      bool survivors_only);

// Reads a group report back (the exceedances column is ignored).
FeatureGroupSet ReadGroupReport(std::istream& in, std::size_t feature_count,
                                std::size_t maps_total);

}  // namespace nfs

#endif  // NFS_GROUPMINE_H_

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

// Brute-force single linkage used as an oracle for the clustering kernel.

#ifndef NFS_TESTS_LINKAGE_ORACLE_H_
#define NFS_TESTS_LINKAGE_ORACLE_H_

#include <algorithm>
#include <cstddef>
#include <tuple>
#include <vector>

#include "nfs/select.h"

namespace nfs::testing {

// Recomputes every cluster-pair linkage from scratch at each step.
inline Partition BruteForceLinkage(const SimilarityMatrix& sim, std::vector<std::size_t> active,
                            std::size_t n_clusters) {
  Partition clusters;
  for (auto f : active) clusters.push_back({f});
  while (clusters.size() > n_clusters) {
    // Key: larger similarity first, then smaller (min_i, min_j).
    std::tuple<double, long, long> best{-1.0, 0, 0};
    std::size_t best_i = 0, best_j = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = 0; j < clusters.size(); ++j) {
        const long min_i = static_cast<long>(clusters[i].front());
        const long min_j = static_cast<long>(clusters[j].front());
        if (min_i >= min_j) continue;
        double link = 0.0;
        for (auto a : clusters[i])
          for (auto b : clusters[j]) link = std::max(link, sim(a, b));
        const std::tuple<double, long, long> key{link, -min_i, -min_j};
        if (std::get<0>(best) < 0.0 || key > best) {
          best = key;
          best_i = i;
          best_j = j;
        }
      }
    clusters[best_i].insert(clusters[best_i].end(), clusters[best_j].begin(),
                            clusters[best_j].end());
    std::sort(clusters[best_i].begin(), clusters[best_i].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_j));
  }
  std::sort(clusters.begin(), clusters.end());
  return clusters;
}

}  // namespace nfs::testing

#endif  // NFS_TESTS_LINKAGE_ORACLE_H_

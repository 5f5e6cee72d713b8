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

#include "nfs/select.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include "nfs/errors.h"
#include "spdlog/spdlog.h"

namespace nfs {

Cooccurrence CountCooccurrence(const FeatureGroupSet& groups) {
  const std::size_t d = groups.feature_count;
  Cooccurrence c{std::vector<double>(d, 0.0), SimilarityMatrix(d)};
  for (const auto& [group, count] : groups.groups) {
    const double w = static_cast<double>(count);
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (group[i] >= d) throw InvalidArgument("similarity: group exceeds feature count");
      c.appearances[group[i]] += w;
      for (std::size_t j = i; j < group.size(); ++j)
        c.together.Set(group[i], group[j], c.together(group[i], group[j]) + w);
    }
  }
  return c;
}

SimilarityMatrix GroupSimilarity(const FeatureGroupSet& groups) {
  if (groups.groups.empty()) throw InvalidArgument("similarity: no feature groups");
  const Cooccurrence c = CountCooccurrence(groups);
  const std::size_t d = groups.feature_count;
  SimilarityMatrix sim(d);
  for (std::size_t a = 0; a < d; ++a) {
    if (c.appearances[a] <= 0.0) continue;
    sim.Set(a, a, 1.0);
    for (std::size_t b = a + 1; b < d; ++b) {
      const double co = c.together(a, b);
      if (co <= 0.0) continue;
      sim.Set(a, b, co / (c.appearances[a] + c.appearances[b] - co));
    }
  }
  return sim;
}

std::vector<std::size_t> ActiveFeatures(const FeatureGroupSet& groups) {
  std::vector<bool> seen(groups.feature_count, false);
  for (const auto& [group, count] : groups.groups)
    for (const auto f : group) seen.at(f) = true;
  std::vector<std::size_t> active;
  for (std::size_t f = 0; f < seen.size(); ++f)
    if (seen[f]) active.push_back(f);
  return active;
}

Partition SingleLinkage(const SimilarityMatrix& sim, std::span<const std::size_t> active,
                        std::size_t n_clusters) {
  if (n_clusters == 0) throw InvalidArgument("single_linkage: n_clusters must be positive");
  if (n_clusters > active.size())
    throw InvalidArgument("single_linkage: " + std::to_string(n_clusters) +
                          " clusters requested but only " + std::to_string(active.size()) +
                          " active features");
  std::vector<std::size_t> features(active.begin(), active.end());
  std::sort(features.begin(), features.end());
  for (const auto f : features)
    if (f >= sim.size()) throw InvalidArgument("single_linkage: feature outside matrix");

  // Clusters kept sorted by min member; `link` holds the cluster-level
  // single-linkage similarity (max over member pairs).
  Partition clusters;
  for (const auto f : features) clusters.push_back({f});
  const std::size_t n = clusters.size();
  std::vector<double> link(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) link[a * n + b] = sim(features[a], features[b]);
  std::vector<std::size_t> slot(n);  // cluster position -> row in `link`
  for (std::size_t i = 0; i < n; ++i) slot[i] = i;

  while (clusters.size() > n_clusters) {
    std::size_t best_a = 0, best_b = 1;
    double best = link[slot[0] * n + slot[1]];
    for (std::size_t a = 0; a < clusters.size(); ++a)
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        const double s = link[slot[a] * n + slot[b]];
        if (s > best) {
          best = s;
          best_a = a;
          best_b = b;
        }
      }
    const std::size_t ra = slot[best_a], rb = slot[best_b];
    for (std::size_t c = 0; c < n; ++c) {
      const double merged = std::max(link[ra * n + c], link[rb * n + c]);
      link[ra * n + c] = merged;
      link[c * n + ra] = merged;
    }
    auto& target = clusters[best_a];
    target.insert(target.end(), clusters[best_b].begin(), clusters[best_b].end());
    std::sort(target.begin(), target.end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
    slot.erase(slot.begin() + static_cast<std::ptrdiff_t>(best_b));
    // best_a keeps the smaller min member, so the order is preserved.
  }
  return clusters;
}

Partition SingleLinkage(const SimilarityMatrix& sim, std::size_t n_clusters) {
  std::vector<std::size_t> all(sim.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return SingleLinkage(sim, all, n_clusters);
}

SelectionResult PickRepresentatives(const Partition& partition,
                                    std::span<const double> frequency) {
  SelectionResult result;
  result.clusters = partition;
  result.frequency.assign(frequency.begin(), frequency.end());
  result.cluster_of.assign(frequency.size(), -1);
  result.rule = "max-frequency";
  for (std::size_t c = 0; c < partition.size(); ++c) {
    const auto& cluster = partition[c];
    if (cluster.empty()) throw InvalidArgument("pick_representatives: empty cluster");
    std::size_t best = cluster.front();
    for (const auto f : cluster) {
      if (f >= frequency.size())
        throw InvalidArgument("pick_representatives: feature without frequency");
      result.cluster_of[f] = static_cast<int>(c);
      if (frequency[f] > frequency[best] || (frequency[f] == frequency[best] && f < best))
        best = f;
    }
    result.kept.push_back(best);
  }
  std::sort(result.kept.begin(), result.kept.end());
  return result;
}

SelectionResult SelectFromGroups(const FeatureGroupSet& survivors, std::size_t n_keep) {
  if (n_keep == 0) throw InvalidArgument("nfs_select: n_keep must be positive");
  if (survivors.groups.empty())
    throw DataError("nfs_select: no feature group survived pruning");
  const SimilarityMatrix sim = GroupSimilarity(survivors);
  const auto active = ActiveFeatures(survivors);
  const Cooccurrence co = CountCooccurrence(survivors);
  std::vector<std::string> warnings;
  std::size_t clusters = n_keep;
  if (active.size() < n_keep) {
    warnings.push_back("only " + std::to_string(active.size()) +
                       " features appear in surviving groups; " + std::to_string(n_keep) +
                       " requested");
    spdlog::warn("nfs_select: {}", warnings.back());
    clusters = active.size();
  }
  SelectionResult result = PickRepresentatives(SingleLinkage(sim, active, clusters),
                                                co.appearances);
  result.warnings = std::move(warnings);
  return result;
}

NfsResult NfsSelect(const QuerySet& train, const QuerySet& valid, const NfsConfig& config,
                    Execution execution) {
  if (config.n_keep == 0) throw InvalidArgument("nfs_select: n_keep must be positive");
  config.null_model.Validate();
  NfsResult out;
  TrainResult trained = Train(train, valid, config.reranker, config.train, {}, execution);
  out.model = std::move(trained.model);
  out.history = std::move(trained.history);
  out.mined = MineGroups(out.model, train, config.null_model.threshold, execution);
  out.pruned = Prune(out.mined, config.null_model, NullSampling::kBinomial, execution);
  out.selection = SelectFromGroups(out.pruned.survivors, config.n_keep);
  return out;
}

void WriteFeatureList(std::span<const std::size_t> features, std::ostream& out) {
  std::vector<std::size_t> sorted(features.begin(), features.end());
  std::sort(sorted.begin(), sorted.end());
  for (const auto f : sorted) out << (f + 1) << '\n';
}

std::vector<std::size_t> ReadFeatureList(std::istream& in) {
  std::vector<std::size_t> features;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(first));
    } catch (const std::exception&) {
      throw DataError("feature list line " + std::to_string(line_number) + ": not an id");
    }
    if (id == 0) throw DataError("feature list line " + std::to_string(line_number) +
                                 ": ids are 1-based");
    features.push_back(id - 1);
  }
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  if (features.empty()) throw DataError("feature list is empty");
  return features;
}

void WriteSelectionReport(const SelectionResult& result, std::ostream& out) {
  out << "# rule\t" << result.rule << '\n';
  for (const auto& w : result.warnings) out << "# warning\t" << w << '\n';
  out << "# feature\tcluster\tscore\tkept\n";
  std::vector<bool> kept(result.frequency.size(), false);
  for (const auto f : result.kept)
    if (f < kept.size()) kept[f] = true;
  for (std::size_t f = 0; f < result.frequency.size(); ++f) {
    if (result.cluster_of.empty() || result.cluster_of[f] < 0) continue;
    out << (f + 1) << '\t' << (result.cluster_of[f] + 1) << '\t' << result.frequency[f]
        << '\t' << (kept[f] ? 1 : 0) << '\n';
  }
}

}  // namespace nfs

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

#include "nfs/groupmine.h"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <string>

#include "nfs/errors.h"
#include "nfs/random.h"

namespace nfs {

void NullModelConfig::Validate() const {
  if (datasets == 0) throw InvalidArgument("null model: K must be positive");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw InvalidArgument("null model: threshold must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw InvalidArgument("null model: alpha must lie in (0, 1]");
}

double GroupMatchProbability(std::size_t feature_count, std::size_t group_size,
                             double threshold) {
  if (group_size > feature_count) return 0.0;
  return std::pow(1.0 - threshold, static_cast<double>(group_size)) *
         std::pow(threshold, static_cast<double>(feature_count - group_size));
}

namespace {

constexpr std::uint64_t kBinomialStream = 0xb1;
constexpr std::uint64_t kLiteralStream = 0x11;

void BinomialDataset(std::size_t maps, const std::vector<double>& probabilities,
                     Rng& rng, std::vector<std::size_t>& out) {
  for (std::size_t t = 0; t < probabilities.size(); ++t) {
    std::binomial_distribution<std::size_t> draw(maps, probabilities[t]);
    out[t] = draw(rng);
  }
}

void LiteralDataset(std::size_t feature_count, std::size_t maps, double threshold,
                    const std::map<FeatureGroup, std::size_t>& index, Rng& rng,
                    std::vector<std::size_t>& out) {
  FeatureGroup salient;
  for (std::size_t m = 0; m < maps; ++m) {
    salient.clear();
    for (std::size_t j = 0; j < feature_count; ++j)
      if (UniformUnit(rng) > threshold) salient.push_back(j);
    if (salient.empty()) continue;
    if (const auto it = index.find(salient); it != index.end()) ++out[it->second];
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> RandomGroupFrequencies(
    std::size_t feature_count, std::size_t maps_per_dataset, std::size_t datasets,
    double threshold, std::uint64_t seed, const std::vector<FeatureGroup>& targets,
    NullSampling sampling, Execution execution) {
  if (targets.empty()) throw InvalidArgument("random_group_frequencies: no targets");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw InvalidArgument("random_group_frequencies: threshold must lie in (0, 1)");
  std::vector<double> probabilities;
  std::map<FeatureGroup, std::size_t> index;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto& g = targets[t];
    if (g.empty()) throw InvalidArgument("random_group_frequencies: empty target group");
    if (g.back() >= feature_count)
      throw InvalidArgument("random_group_frequencies: group exceeds feature count");
    probabilities.push_back(GroupMatchProbability(feature_count, g.size(), threshold));
    index.emplace(g, t);
  }

  // per_dataset[k][target], transposed at the end.
  std::vector<std::vector<std::size_t>> per_dataset(
      datasets, std::vector<std::size_t>(targets.size(), 0));
  ParallelFor(datasets, execution, [&](std::size_t k) {
    if (sampling == NullSampling::kBinomial) {
      Rng rng = MakeRng(seed, {kBinomialStream, k});
      BinomialDataset(maps_per_dataset, probabilities, rng, per_dataset[k]);
    } else {
      Rng rng = MakeRng(seed, {kLiteralStream, k});
      std::vector<std::size_t> counts(index.size(), 0);
      LiteralDataset(feature_count, maps_per_dataset, threshold, index, rng, counts);
      // Duplicate targets share the counts of their first occurrence.
      for (std::size_t t = 0; t < targets.size(); ++t)
        per_dataset[k][t] = counts[index.at(targets[t])];
    }
  });

  std::vector<std::vector<std::size_t>> counts(targets.size(),
                                               std::vector<std::size_t>(datasets, 0));
  for (std::size_t k = 0; k < datasets; ++k)
    for (std::size_t t = 0; t < targets.size(); ++t) counts[t][k] = per_dataset[k][t];
  return counts;
}

PruneResult Prune(const FeatureGroupSet& real, const NullModelConfig& config,
                  NullSampling sampling, Execution execution) {
  config.Validate();
  if (real.maps_total == 0) throw InvalidArgument("prune: no saliency maps were mined");
  PruneResult result;
  result.survivors.maps_total = real.maps_total;
  result.survivors.feature_count = real.feature_count;
  if (real.groups.empty()) return result;

  std::vector<FeatureGroup> targets;
  for (const auto& [group, count] : real.groups) targets.push_back(group);
  const auto null_counts =
      RandomGroupFrequencies(real.feature_count, real.maps_total, config.datasets,
                             config.threshold, config.seed, targets, sampling, execution);
  const double limit = config.alpha * static_cast<double>(config.datasets);
  std::size_t t = 0;
  for (const auto& [group, count] : real.groups) {
    GroupVerdict verdict{group, count, 0, false};
    for (const std::size_t random_count : null_counts[t])
      if (random_count >= count) ++verdict.exceedances;
    verdict.survives = static_cast<double>(verdict.exceedances) <= limit;
    if (verdict.survives) result.survivors.groups.emplace(group, count);
    result.verdicts.push_back(std::move(verdict));
    ++t;
  }
  return result;
}

void WriteGroupReport(const std::vector<GroupVerdict>& verdicts, std::ostream& out,
                      bool survivors_only) {
  for (const auto& v : verdicts) {
    if (survivors_only && !v.survives) continue;
    out << FormatGroup(v.group) << '\t' << v.count << '\t' << v.exceedances << '\n';
  }
}

FeatureGroupSet ReadGroupReport(std::istream& in, std::size_t feature_count,
                                std::size_t maps_total) {
  FeatureGroupSet set;
  set.feature_count = feature_count;
  set.maps_total = maps_total;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("group report line " + std::to_string(line_number) +
                      ": expected members<TAB>count");
    const FeatureGroup group = ParseGroup(std::string_view(line).substr(0, tab));
    if (group.back() >= feature_count)
      throw DataError("group report line " + std::to_string(line_number) +
                      ": feature id exceeds feature count");
    std::size_t count = 0;
    try {
      count = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError("group report line " + std::to_string(line_number) + ": bad count");
    }
    if (count == 0) continue;
    set.groups[group] += count;
  }
  return set;
}

}  // namespace nfs

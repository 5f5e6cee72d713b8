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

#include "nfs/saliency.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "nfs/errors.h"

namespace nfs {

using diff::Tensor;

std::size_t FeatureGroupSet::TotalCount() const {
  std::size_t total = 0;
  for (const auto& [group, count] : groups) total += count;
  return total;
}

std::vector<std::vector<double>> RawSaliencyAll(const ModelParams& params,
                                                const RerankerConfig& config,
                                                std::span<const double> features,
                                                std::size_t docs) {
  if (!params.AllFinite())
    throw NumericalError("saliency: model parameters are not finite");
  const std::size_t d = params.feature_count;
  diff::Graph graph;
  const auto input = graph.Leaf(
      Tensor(docs, d, std::vector<double>(features.begin(), features.end())));
  const ForwardPass pass = Forward(graph, input, params, config, Mode::kEval);
  std::vector<diff::Var> roots;
  roots.reserve(docs);
  for (std::size_t i = 0; i < docs; ++i) roots.push_back(diff::Slice(pass.scores, 0, i, i + 1));

  std::vector<std::vector<double>> raw(docs, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < docs; ++i) {
    graph.Backward(roots[i]);
    const Tensor& grad = input.grad();
    for (std::size_t j = 0; j < d; ++j) raw[i][j] = std::fabs(grad(i, j));
  }
  return raw;
}

std::vector<double> RawSaliency(const ModelParams& params, const RerankerConfig& config,
                                std::span<const double> features, std::size_t docs,
                                std::size_t doc_index) {
  if (doc_index >= docs) throw InvalidArgument("saliency: document index out of range");
  if (!params.AllFinite())
    throw NumericalError("saliency: model parameters are not finite");
  const std::size_t d = params.feature_count;
  diff::Graph graph;
  const auto input = graph.Leaf(
      Tensor(docs, d, std::vector<double>(features.begin(), features.end())));
  const ForwardPass pass = Forward(graph, input, params, config, Mode::kEval);
  graph.Backward(diff::Slice(pass.scores, 0, doc_index, doc_index + 1));
  const Tensor& grad = input.grad();
  std::vector<double> raw(d);
  for (std::size_t j = 0; j < d; ++j) raw[j] = std::fabs(grad(doc_index, j));
  return raw;
}

SaliencyMap MinMaxNormalize(std::span<const double> raw) {
  SaliencyMap map{std::vector<double>(raw.size(), 0.0)};
  if (raw.empty()) return map;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return map;
  for (std::size_t j = 0; j < raw.size(); ++j) map.values[j] = (raw[j] - *lo) / range;
  return map;
}

namespace {

std::vector<double> StandardizedMatrix(const TrainedModel& model, const Query& query) {
  std::vector<double> features = query.FeatureMatrix();
  const std::size_t d = model.params.feature_count;
  if (!query.documents.empty() && query.documents.front().features.size() != d)
    throw InvalidArgument("saliency: query feature count does not match the model");
  for (std::size_t r = 0; r < query.documents.size(); ++r)
    model.standardizer.ApplyRow(std::span<double>(features).subspan(r * d, d));
  return features;
}

}  // namespace

SaliencyMap ComputeSaliencyMap(const TrainedModel& model, const Query& query,
                               std::size_t doc_index) {
  const auto features = StandardizedMatrix(model, query);
  return MinMaxNormalize(RawSaliency(model.params, model.config, features,
                                     query.documents.size(), doc_index));
}

std::optional<FeatureGroup> ExtractGroup(const SaliencyMap& map, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw InvalidArgument("extract_group: threshold must lie in (0, 1)");
  FeatureGroup group;
  for (std::size_t j = 0; j < map.values.size(); ++j)
    if (map.values[j] > threshold) group.push_back(j);
  if (group.empty()) return std::nullopt;
  return group;
}

std::vector<std::vector<SaliencyMap>> ComputeAllMaps(const TrainedModel& model,
                                                     const QuerySet& qs,
                                                     Execution execution) {
  if (qs.feature_count != model.params.feature_count)
    throw InvalidArgument("saliency: data has " + std::to_string(qs.feature_count) +
                          " features, model expects " +
                          std::to_string(model.params.feature_count));
  std::vector<std::vector<SaliencyMap>> maps(qs.queries.size());
  ParallelFor(qs.queries.size(), execution, [&](std::size_t q) {
    const Query& query = qs.queries[q];
    const auto features = StandardizedMatrix(model, query);
    const auto raw =
        RawSaliencyAll(model.params, model.config, features, query.documents.size());
    maps[q].reserve(raw.size());
    for (const auto& r : raw) maps[q].push_back(MinMaxNormalize(r));
  });
  return maps;
}

FeatureGroupSet AggregateGroups(const std::vector<std::vector<SaliencyMap>>& maps,
                                std::size_t feature_count, double threshold) {
  FeatureGroupSet set;
  set.feature_count = feature_count;
  for (const auto& per_query : maps)
    for (const auto& map : per_query) {
      ++set.maps_total;
      if (auto group = ExtractGroup(map, threshold)) ++set.groups[*group];
    }
  return set;
}

FeatureGroupSet MineGroups(const TrainedModel& model, const QuerySet& qs, double threshold,
                           Execution execution) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw InvalidArgument("mine_groups: threshold must lie in (0, 1)");
  return AggregateGroups(ComputeAllMaps(model, qs, execution), qs.feature_count, threshold);
}

void WriteSaliencyDump(const QuerySet& qs,
                       const std::vector<std::vector<SaliencyMap>>& maps,
                       std::ostream& out) {
  char buf[64];
  for (std::size_t q = 0; q < maps.size(); ++q)
    for (std::size_t i = 0; i < maps[q].size(); ++i) {
      std::string line = qs.queries[q].qid + '\t' + std::to_string(i) + '\t';
      const auto& values = maps[q][i].values;
      for (std::size_t j = 0; j < values.size(); ++j) {
        if (j > 0) line += ',';
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), values[j]);
        line.append(buf, ptr);
      }
      out << line << '\n';
    }
}

std::string FormatGroup(const FeatureGroup& group) {
  std::string s;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (i > 0) s += ',';
    s += std::to_string(group[i] + 1);
  }
  return s;
}

FeatureGroup ParseGroup(std::string_view text) {
  FeatureGroup group;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    std::size_t id = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), id);
    if (ec != std::errc() || ptr != item.data() + item.size() || id == 0)
      throw DataError("bad feature id '" + std::string(item) + "' in group");
    group.push_back(id - 1);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  std::sort(group.begin(), group.end());
  group.erase(std::unique(group.begin(), group.end()), group.end());
  if (group.empty()) throw DataError("empty feature group");
  return group;
}

}  // namespace nfs

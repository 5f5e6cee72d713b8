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

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nfs/errors.h"
#include "nfs/trainer.h"

namespace nfs {

namespace {

using nlohmann::json;
using diff::Tensor;

constexpr const char* kFormat = "nfs-checkpoint";
constexpr int kVersion = 1;

json TensorToJson(const Tensor& t) {
  return {{"shape", t.shape()}, {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor TensorFromJson(const json& j) {
  if (j.is_null()) return Tensor();
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto values = j.at("values").get<std::vector<double>>();
  if (shape.empty() && values.empty()) return Tensor();
  return Tensor(std::move(shape), std::move(values));
}

json NormToJson(const BatchNormParams& n) {
  return {{"gamma", TensorToJson(n.gamma)},
          {"beta", TensorToJson(n.beta)},
          {"running_mean", TensorToJson(n.running_mean)},
          {"running_var", TensorToJson(n.running_var)}};
}

BatchNormParams NormFromJson(const json& j) {
  return {TensorFromJson(j.at("gamma")), TensorFromJson(j.at("beta")),
          TensorFromJson(j.at("running_mean")), TensorFromJson(j.at("running_var"))};
}

json ConfigToJson(const RerankerConfig& c) {
  return {{"n_attention_layers", c.n_attention_layers},
          {"n_heads", c.n_heads},
          {"feature_embedding", c.feature_embedding},
          {"hidden_size", c.hidden_size},
          {"dropout_p", c.dropout_p},
          {"bn_momentum", c.bn_momentum},
          {"temperature", c.temperature}};
}

RerankerConfig ConfigFromJson(const json& j) {
  RerankerConfig c;
  c.n_attention_layers = j.at("n_attention_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.feature_embedding = j.at("feature_embedding").get<std::size_t>();
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.temperature = j.at("temperature").get<double>();
  return c;
}

json TrainConfigToJson(const TrainConfig& c) {
  return {{"epochs", c.epochs},           {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},   {"adam_eps", c.adam_eps},
          {"seed", c.seed},               {"shuffle", c.shuffle}};
}

TrainConfig TrainConfigFromJson(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.shuffle = j.at("shuffle").get<bool>();
  return c;
}

json ParamsToJson(const ModelParams& p) {
  json attention = json::array();
  for (const auto& layer : p.attention)
    attention.push_back({{"query", TensorToJson(layer.query)},
                         {"key", TensorToJson(layer.key)},
                         {"value", TensorToJson(layer.value)},
                         {"output", TensorToJson(layer.output)}});
  return {{"feature_count", p.feature_count},
          {"transform_logits", TensorToJson(p.transform_logits)},
          {"embedding", TensorToJson(p.embedding)},
          {"embedding_bias", TensorToJson(p.embedding_bias)},
          {"attention", attention},
          {"hidden_norm", NormToJson(p.hidden_norm)},
          {"hidden_weight", TensorToJson(p.hidden_weight)},
          {"hidden_bias", TensorToJson(p.hidden_bias)},
          {"output_norm", NormToJson(p.output_norm)},
          {"output_weight", TensorToJson(p.output_weight)},
          {"output_bias", TensorToJson(p.output_bias)}};
}

ModelParams ParamsFromJson(const json& j) {
  ModelParams p;
  p.feature_count = j.at("feature_count").get<std::size_t>();
  p.transform_logits = TensorFromJson(j.at("transform_logits"));
  p.embedding = TensorFromJson(j.at("embedding"));
  p.embedding_bias = TensorFromJson(j.at("embedding_bias"));
  for (const auto& layer : j.at("attention"))
    p.attention.push_back({TensorFromJson(layer.at("query")), TensorFromJson(layer.at("key")),
                           TensorFromJson(layer.at("value")),
                           TensorFromJson(layer.at("output"))});
  p.hidden_norm = NormFromJson(j.at("hidden_norm"));
  p.hidden_weight = TensorFromJson(j.at("hidden_weight"));
  p.hidden_bias = TensorFromJson(j.at("hidden_bias"));
  p.output_norm = NormFromJson(j.at("output_norm"));
  p.output_weight = TensorFromJson(j.at("output_weight"));
  p.output_bias = TensorFromJson(j.at("output_bias"));
  return p;
}

}  // namespace

std::string CheckpointToString(const TrainingCheckpoint& c) {
  json adam_first = json::array(), adam_second = json::array();
  for (const auto& t : c.adam.first) adam_first.push_back(TensorToJson(t));
  for (const auto& t : c.adam.second) adam_second.push_back(TensorToJson(t));
  json history = json::array();
  for (const auto& h : c.history)
    history.push_back({{"epoch", h.epoch}, {"mean_loss", h.mean_loss},
                       {"valid_ndcg3", h.valid_ndcg3}});
  const json root = {
      {"format", kFormat},
      {"version", kVersion},
      {"reranker", ConfigToJson(c.model.config)},
      {"standardizer", {{"mean", c.model.standardizer.mean},
                        {"stddev", c.model.standardizer.stddev}}},
      {"params", ParamsToJson(c.model.params)},
      {"train", TrainConfigToJson(c.train)},
      {"adam", {{"step", c.adam.step}, {"first", adam_first}, {"second", adam_second}}},
      {"history", history}};
  return root.dump(1);
}

TrainingCheckpoint CheckpointFromString(const std::string& text) {
  try {
    const json root = json::parse(text);
    if (root.at("format") != kFormat) throw DataError("not an nfs checkpoint");
    if (root.at("version").get<int>() != kVersion)
      throw DataError("unsupported checkpoint version " + root.at("version").dump());
    TrainingCheckpoint c;
    c.model.config = ConfigFromJson(root.at("reranker"));
    c.model.standardizer.mean = root.at("standardizer").at("mean").get<std::vector<double>>();
    c.model.standardizer.stddev =
        root.at("standardizer").at("stddev").get<std::vector<double>>();
    c.model.params = ParamsFromJson(root.at("params"));
    c.train = TrainConfigFromJson(root.at("train"));
    c.adam.step = root.at("adam").at("step").get<std::uint64_t>();
    for (const auto& t : root.at("adam").at("first")) c.adam.first.push_back(TensorFromJson(t));
    for (const auto& t : root.at("adam").at("second")) c.adam.second.push_back(TensorFromJson(t));
    for (const auto& h : root.at("history"))
      c.history.push_back({h.at("epoch").get<std::size_t>(), h.at("mean_loss").get<double>(),
                           h.at("valid_ndcg3").get<double>()});
    c.model.config.Validate(c.model.params.feature_count);
    if (c.model.standardizer.mean.size() != c.model.params.feature_count)
      throw DataError("checkpoint standardizer does not match feature count");
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const TrainingCheckpoint& checkpoint, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << CheckpointToString(checkpoint) << '\n';
}

TrainingCheckpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return CheckpointFromString(buffer.str());
}

}  // namespace nfs

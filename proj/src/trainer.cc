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

#include "nfs/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nfs/errors.h"
#include "nfs/metrics.h"
#include "nfs/random.h"

namespace nfs {

using diff::Tensor;

Standardizer Standardizer::Fit(const QuerySet& qs) {
  const std::size_t d = qs.feature_count;
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  const std::size_t n = qs.DocumentCount();
  if (n == 0) throw InvalidArgument("standardize: empty query set");
  for (const auto& q : qs.queries)
    for (const auto& doc : q.documents)
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += doc.features[j];
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (const auto& q : qs.queries)
    for (const auto& doc : q.documents)
      for (std::size_t j = 0; j < d; ++j) {
        const double dev = doc.features[j] - s.mean[j];
        s.stddev[j] += dev * dev;
      }
  for (auto& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(n));
    // Spread at rounding level is treated as constant.
    if (!(v > 1e-12)) v = 0.0;
  }
  return s;
}

void Standardizer::ApplyRow(std::span<double> features) const {
  if (features.size() != mean.size())
    throw InvalidArgument("standardize: feature count mismatch");
  for (std::size_t j = 0; j < features.size(); ++j) {
    const double centered = features[j] - mean[j];
    features[j] = stddev[j] > 0.0 ? centered / stddev[j] : centered;
  }
}

QuerySet Standardizer::Apply(const QuerySet& qs) const {
  QuerySet out = qs;
  for (auto& q : out.queries)
    for (auto& doc : q.documents) ApplyRow(doc.features);
  return out;
}

std::pair<QuerySet, Standardizer> Standardize(const QuerySet& qs) {
  Standardizer s = Standardizer::Fit(qs);
  QuerySet out = s.Apply(qs);
  return {std::move(out), std::move(s)};
}

void TrainConfig::Validate() const {
  if (epochs == 0) throw InvalidArgument("train: epochs must be positive");
  if (batch_size == 0) throw InvalidArgument("train: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("train: learning_rate must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
    throw InvalidArgument("train: Adam betas must lie in (0, 1)");
  if (!(adam_eps > 0.0)) throw InvalidArgument("train: adam_eps must be positive");
}

AdamState AdamState::For(const ModelParams& params) {
  AdamState state;
  for (const Tensor* t : params.Trainable()) {
    state.first.push_back(Tensor::ZerosLike(*t));
    state.second.push_back(Tensor::ZerosLike(*t));
  }
  return state;
}

void AdamStep(std::span<Tensor* const> params, std::span<const Tensor> grads,
              AdamState& state, double learning_rate, double beta1, double beta2,
              double eps) {
  if (params.size() != grads.size() || params.size() != state.first.size() ||
      params.size() != state.second.size())
    throw InvalidArgument("adam: parameter/gradient/state count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->SameShape(grads[i]) || !params[i]->SameShape(state.first[i]))
      throw ShapeError("adam: shape mismatch for parameter " + std::to_string(i));
    if (!grads[i].AllFinite())
      throw NumericalError("adam: non-finite gradient for parameter " + std::to_string(i));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(beta1, t);
  const double correction2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = state.first[i];
    Tensor& v = state.second[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

std::vector<double> TrainedModel::ScoreQuery(const Query& query) const {
  std::vector<double> features = query.FeatureMatrix();
  const std::size_t d = params.feature_count;
  for (std::size_t r = 0; r < query.documents.size(); ++r)
    standardizer.ApplyRow(std::span<double>(features).subspan(r * d, d));
  return Score(params, config, features, query.documents.size());
}

std::vector<std::vector<double>> TrainedModel::ScoreAll(const QuerySet& qs,
                                                        Execution execution) const {
  std::vector<std::vector<double>> scores(qs.queries.size());
  ParallelFor(qs.queries.size(), execution,
              [&](std::size_t q) { scores[q] = ScoreQuery(qs.queries[q]); });
  return scores;
}

BatchGradient ComputeBatchGradient(const ModelParams& params,
                                   const RerankerConfig& config,
                                   std::span<const Query* const> queries,
                                   std::uint64_t seed, std::uint64_t epoch,
                                   std::size_t first_position, Execution execution) {
  struct PerQuery {
    std::vector<Tensor> grads;
    double loss = 0.0;
    std::vector<BatchNormStats> stats;
  };
  std::vector<PerQuery> results(queries.size());
  ParallelFor(queries.size(), execution, [&](std::size_t i) {
    const Query& q = *queries[i];
    Rng rng = MakeRng(seed, {0xd509, epoch, first_position + i});
    diff::Graph graph;
    const auto input = graph.Constant(
        Tensor(q.documents.size(), params.feature_count, q.FeatureMatrix()));
    ForwardPass pass = Forward(graph, input, params, config, Mode::kTrain, &rng);
    const auto labels = q.Labels();
    const auto loss = ApproxNdcgLoss(pass.scores, labels, config.temperature);
    graph.Backward(loss);
    PerQuery& out = results[i];
    out.loss = loss.value().item();
    out.grads.reserve(pass.params.size());
    for (const auto& leaf : pass.params) out.grads.push_back(leaf.grad());
    out.stats = std::move(pass.batch_stats);
  });

  BatchGradient batch;
  for (const Tensor* t : params.Trainable()) batch.grads.push_back(Tensor::ZerosLike(*t));
  batch.batch_stats.resize(2);
  for (std::size_t n = 0; n < 2; ++n) {
    const std::size_t width = n == 0 ? params.hidden_norm.gamma.size()
                                     : params.output_norm.gamma.size();
    batch.batch_stats[n].mean.assign(width, 0.0);
    batch.batch_stats[n].var.assign(width, 0.0);
  }
  for (const PerQuery& r : results) {
    batch.loss += r.loss;
    for (std::size_t p = 0; p < r.grads.size(); ++p)
      for (std::size_t j = 0; j < r.grads[p].size(); ++j) batch.grads[p][j] += r.grads[p][j];
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < r.stats[n].mean.size(); ++c) {
        batch.batch_stats[n].mean[c] += r.stats[n].mean[c];
        batch.batch_stats[n].var[c] += r.stats[n].var[c];
      }
  }
  const double inv = queries.empty() ? 0.0 : 1.0 / static_cast<double>(queries.size());
  batch.loss *= inv;
  for (auto& g : batch.grads)
    for (std::size_t j = 0; j < g.size(); ++j) g[j] *= inv;
  for (auto& s : batch.batch_stats) {
    for (auto& m : s.mean) m *= inv;
    for (auto& v : s.var) v *= inv;
  }
  return batch;
}

Trainer::Trainer(const QuerySet& train, const QuerySet& valid,
                 const RerankerConfig& reranker, const TrainConfig& config,
                 Execution execution)
    : execution_(execution) {
  config.Validate();
  train.Validate();
  if (train.queries.empty()) throw InvalidArgument("train: no training queries");
  if (valid.feature_count != train.feature_count)
    throw InvalidArgument("train: train and validation feature counts differ");
  state_.train = config;
  state_.model.config = reranker;
  state_.model.standardizer = Standardizer::Fit(train);
  state_.model.params = InitParams(reranker, train.feature_count, config.seed);
  state_.adam = AdamState::For(state_.model.params);
  PrepareData(train, valid);
}

Trainer::Trainer(const QuerySet& train, const QuerySet& valid,
                 TrainingCheckpoint checkpoint, Execution execution)
    : state_(std::move(checkpoint)), execution_(execution) {
  state_.train.Validate();
  if (train.feature_count != state_.model.params.feature_count ||
      valid.feature_count != train.feature_count)
    throw InvalidArgument("train: checkpoint feature count does not match data");
  PrepareData(train, valid);
}

void Trainer::PrepareData(const QuerySet& train, const QuerySet& valid) {
  train_ = state_.model.standardizer.Apply(train);
  valid_ = state_.model.standardizer.Apply(valid);
}

EpochRecord Trainer::RunEpoch() {
  const TrainConfig& cfg = state_.train;
  const std::uint64_t epoch = state_.history.size();
  std::vector<std::size_t> order(train_.queries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (cfg.shuffle) {
    Rng rng = MakeRng(cfg.seed, {0x5f1e, epoch});
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng() % i]);
  }

  ModelParams& params = state_.model.params;
  double loss_total = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
    const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
    std::vector<const Query*> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_.queries[order[i]]);
    BatchGradient grad;
    try {
      grad = ComputeBatchGradient(params, state_.model.config, batch, cfg.seed, epoch,
                                  begin, execution_);
      if (!std::isfinite(grad.loss)) throw NumericalError("non-finite loss");
      auto trainable = params.Trainable();
      AdamStep(trainable, grad.grads, state_.adam, cfg.learning_rate, cfg.adam_beta1,
               cfg.adam_beta2, cfg.adam_eps);
      UpdateRunningStats(params, grad.batch_stats, state_.model.config.bn_momentum);
      if (!params.AllFinite()) throw NumericalError("non-finite parameters");
    } catch (const NumericalError& e) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1) +
                           ", batch " + std::to_string(batch_index + 1) + ": " + e.what());
    }
    loss_total += grad.loss * static_cast<double>(end - begin);
  }

  EpochRecord record;
  record.epoch = epoch + 1;
  record.mean_loss = loss_total / static_cast<double>(order.size());
  if (!valid_.queries.empty()) {
    std::vector<std::vector<double>> scores(valid_.queries.size());
    ParallelFor(valid_.queries.size(), execution_, [&](std::size_t q) {
      const Query& query = valid_.queries[q];
      scores[q] = Score(params, state_.model.config, query.FeatureMatrix(),
                        query.documents.size());
    });
    record.valid_ndcg3 = MeanNdcgAtK(valid_, scores, 3);
  }
  state_.history.push_back(record);
  return record;
}

TrainResult Train(const QuerySet& train, const QuerySet& valid,
                  const RerankerConfig& reranker, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch,
                  Execution execution) {
  Trainer trainer(train, valid, reranker, config, execution);
  while (!trainer.Done()) {
    const EpochRecord record = trainer.RunEpoch();
    if (on_epoch) on_epoch(record);
  }
  return {trainer.model(), trainer.history()};
}

}  // namespace nfs

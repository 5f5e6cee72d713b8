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

// Mini-batch ApproxNDCG training of the reranker with Adam.

#ifndef NFS_TRAINER_H_
#define NFS_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "nfs/data.h"
#include "nfs/diffcore.h"
#include "nfs/parallel.h"
#include "nfs/reranker.h"

namespace nfs {

// Per-feature z-scoring fitted on a training corpus.
struct Standardizer {
  std::vector<double> mean;
  // 0 marks a constant feature; it is centered with a unit divisor.
  std::vector<double> stddev;

  static Standardizer Fit(const QuerySet& qs);
  QuerySet Apply(const QuerySet& qs) const;
  void ApplyRow(std::span<double> features) const;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

std::pair<QuerySet, Standardizer> Standardize(const QuerySet& qs);

struct TrainConfig {
  std::size_t epochs = 500;
  // Queries per optimizer step.
  std::size_t batch_size = 128;
  double learning_rate = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void Validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamState {
  std::vector<diff::Tensor> first, second;
  std::uint64_t step = 0;

  static AdamState For(const ModelParams& params);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update. Throws NumericalError on non-finite
// gradients, leaving parameters untouched.
void AdamStep(std::span<diff::Tensor* const> params,
              std::span<const diff::Tensor> grads, AdamState& state,
              double learning_rate, double beta1, double beta2, double eps);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double valid_ndcg3 = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

// Parameters plus the input normalization they were trained with.
struct TrainedModel {
  RerankerConfig config;
  ModelParams params;
  Standardizer standardizer;

  // Eval-mode scores for raw (unstandardized) documents.
  std::vector<double> ScoreQuery(const Query& query) const;
  std::vector<std::vector<double>> ScoreAll(
      const QuerySet& qs, Execution execution = Execution::kParallel) const;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

// Everything needed to resume training bit-exactly.
struct TrainingCheckpoint {
  TrainedModel model;
  TrainConfig train;
  AdamState adam;
  std::vector<EpochRecord> history;

  friend bool operator==(const TrainingCheckpoint&, const TrainingCheckpoint&) = default;
};

// Summed gradient and loss of a batch of standardized queries.
struct BatchGradient {
  std::vector<diff::Tensor> grads;  // mean over the batch
  double loss = 0.0;                // mean over the batch
  std::vector<BatchNormStats> batch_stats;  // mean over the batch
};

// Per-query forward/backward, one dropout stream per query derived from
// (seed, epoch, position). Reduction runs in query order, so serial and
// parallel execution agree bit for bit.
BatchGradient ComputeBatchGradient(const ModelParams& params,
                                   const RerankerConfig& config,
                                   std::span<const Query* const> queries,
                                   std::uint64_t seed, std::uint64_t epoch,
                                   std::size_t first_position,
                                   Execution execution);

class Trainer {
 public:
  // Fits the standardizer on `train` and initializes parameters from the
  // seed.
  Trainer(const QuerySet& train, const QuerySet& valid,
          const RerankerConfig& reranker, const TrainConfig& config,
          Execution execution = Execution::kParallel);
  // Resumes from a checkpoint; the data must be the original corpora.
  Trainer(const QuerySet& train, const QuerySet& valid,
          TrainingCheckpoint checkpoint,
          Execution execution = Execution::kParallel);

  bool Done() const { return state_.history.size() >= state_.train.epochs; }
  // Throws NumericalError naming the epoch and batch on divergence.
  EpochRecord RunEpoch();

  const TrainingCheckpoint& checkpoint() const { return state_; }
  const TrainedModel& model() const { return state_.model; }
  const std::vector<EpochRecord>& history() const { return state_.history; }

 private:
  void PrepareData(const QuerySet& train, const QuerySet& valid);

  TrainingCheckpoint state_;
  Execution execution_;
  QuerySet train_;
  QuerySet valid_;
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochRecord> history;
};

TrainResult Train(const QuerySet& train, const QuerySet& valid,
                  const RerankerConfig& reranker, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {},
                  Execution execution = Execution::kParallel);

// Versioned JSON checkpoint; doubles are written in shortest round-trip
// form so save/load is bit-exact.
void SaveCheckpoint(const TrainingCheckpoint& checkpoint, const std::string& path);
TrainingCheckpoint LoadCheckpoint(const std::string& path);
std::string CheckpointToString(const TrainingCheckpoint& checkpoint);
TrainingCheckpoint CheckpointFromString(const std::string& text);

}  // namespace nfs

#endif  // NFS_TRAINER_H_

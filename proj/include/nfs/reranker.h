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

// Listwise neural reranker: learned per-feature transformation, self-attention
// over the documents of one query, and a two-layer scoring head.
//
//   x -> feature transform [-> embedding] -> n x (multi-head attention +
//   residual) -> BN -> dense(hidden) -> relu -> dropout -> BN -> dense(1)
//
// There is no positional encoding, so scores are permutation-equivariant in
// the documents of a query.

#ifndef NFS_RERANKER_H_
#define NFS_RERANKER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nfs/diffcore.h"
#include "nfs/random.h"

namespace nfs {

struct RerankerConfig {
  std::size_t n_attention_layers = 1;
  std::size_t n_heads = 1;
  // 0 disables the projection after the feature transformation.
  std::size_t feature_embedding = 0;
  std::size_t hidden_size = 128;
  double dropout_p = 0.5;
  double bn_momentum = 0.4;
  // ApproxNDCG sigmoid temperature.
  double temperature = 0.1;

  // Width seen by the attention layers.
  std::size_t ModelWidth(std::size_t feature_count) const {
    return feature_embedding > 0 ? feature_embedding : feature_count;
  }
  // Throws InvalidArgument on any violated invariant.
  void Validate(std::size_t feature_count) const;

  friend bool operator==(const RerankerConfig&, const RerankerConfig&) = default;
};

// Largest head count <= `requested` that divides `width`.
std::size_t AdaptHeadCount(std::size_t width, std::size_t requested);

struct AttentionParams {
  diff::Tensor query, key, value, output;  // width x width

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

struct BatchNormParams {
  diff::Tensor gamma, beta;                  // trainable, 1 x width
  diff::Tensor running_mean, running_var;    // state, 1 x width

  friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

struct ModelParams {
  std::size_t feature_count = 0;
  // feature_count x 3 logits; softmax over each row weights identity,
  // signed log1p and softsign.
  diff::Tensor transform_logits;
  diff::Tensor embedding, embedding_bias;  // empty when disabled
  std::vector<AttentionParams> attention;
  BatchNormParams hidden_norm;
  diff::Tensor hidden_weight, hidden_bias;
  BatchNormParams output_norm;
  diff::Tensor output_weight, output_bias;

  // Fixed traversal order shared by gradients and optimizer state.
  std::vector<diff::Tensor*> Trainable();
  std::vector<const diff::Tensor*> Trainable() const;
  std::vector<std::string> TrainableNames() const;
  bool AllFinite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Glorot-uniform weights, zero biases and logits, identity batch norm.
ModelParams InitParams(const RerankerConfig& config, std::size_t feature_count,
                       std::uint64_t seed);

enum class Mode { kTrain, kEval };

// Per-column batch statistics observed by a train-mode forward pass.
struct BatchNormStats {
  std::vector<double> mean, var;
};

struct ForwardPass {
  diff::Var transformed;  // docs x width after transformation/embedding
  diff::Var scores;       // docs x 1
  // Leaves aligned with ModelParams::Trainable().
  std::vector<diff::Var> params;
  // {hidden_norm, output_norm} statistics in train mode, empty in eval mode.
  std::vector<BatchNormStats> batch_stats;
};

inline constexpr double kBatchNormEpsilon = 1e-5;

// Builds the scoring graph for one query. `input` is docs x feature_count.
// Train mode normalizes with the query's own batch statistics and draws
// dropout masks from `dropout_rng`, which must then be non-null.
// Throws NumericalError when a score is not finite.
ForwardPass Forward(diff::Graph& graph, diff::Var input,
                    const ModelParams& params, const RerankerConfig& config,
                    Mode mode, Rng* dropout_rng = nullptr);

// Eval-mode scores of a row-major docs x feature_count matrix.
std::vector<double> Score(const ModelParams& params,
                          const RerankerConfig& config,
                          std::span<const double> features, std::size_t docs);

// Folds observed statistics into the running estimates:
// running = momentum * running + (1 - momentum) * batch.
void UpdateRunningStats(ModelParams& params,
                        const std::vector<BatchNormStats>& stats,
                        double momentum);

// ApproxNDCG: smooth rank r_i = 1 + sum_{j != i} sigmoid((s_j - s_i) / T),
// loss = -(1 / IDCG) * sum_i (2^y_i - 1) / log2(1 + r_i), IDCG over the full
// list. All-zero label lists give a constant 0 with no gradient.
diff::Var ApproxNdcgLoss(diff::Var scores, std::span<const int> labels,
                         double temperature);

}  // namespace nfs

#endif  // NFS_RERANKER_H_

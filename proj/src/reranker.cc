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

#include "nfs/reranker.h"

#include <cmath>
#include <numbers>
#include <utility>

#include "nfs/errors.h"
#include "nfs/metrics.h"

namespace nfs {

using diff::Graph;
using diff::Tensor;
using diff::Var;

namespace {

Tensor GlorotUniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(fan_in, fan_out, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = limit * (2.0 * UniformUnit(rng) - 1.0);
  return t;
}

BatchNormParams IdentityNorm(std::size_t width) {
  return {Tensor(1, width, 1.0), Tensor(1, width, 0.0), Tensor(1, width, 0.0),
          Tensor(1, width, 1.0)};
}

// Train-mode batch normalization over the rows (documents) of `x`.
Var BatchNormTrain(Var x, Var gamma, Var beta, BatchNormStats& stats) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  stats.mean.assign(cols, 0.0);
  stats.var.assign(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) stats.mean[c] += xv(r, c);
  for (auto& m : stats.mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = xv(r, c) - stats.mean[c];
      stats.var[c] += d * d;
    }
  for (auto& v : stats.var) v /= static_cast<double>(rows);

  std::vector<double> inv_std(cols);
  for (std::size_t c = 0; c < cols; ++c)
    inv_std[c] = 1.0 / std::sqrt(stats.var[c] + kBatchNormEpsilon);
  Tensor normalized(rows, cols, 0.0);
  Tensor out(rows, cols, 0.0);
  const Tensor& g = gamma.value();
  const Tensor& b = beta.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      normalized(r, c) = (xv(r, c) - stats.mean[c]) * inv_std[c];
      out(r, c) = g(0, c) * normalized(r, c) + b(0, c);
    }

  return x.graph()->Record(
      "batch_norm", std::move(out), {x, gamma, beta},
      [normalized = std::move(normalized), inv_std = std::move(inv_std)](
          diff::BackwardContext& ctx) {
        const Tensor& up = ctx.upstream();
        const Tensor& gv = ctx.input(1);
        const std::size_t rows = up.rows(), cols = up.cols();
        std::vector<double> sum_up(cols, 0.0), sum_up_norm(cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            sum_up[c] += up(r, c);
            sum_up_norm[c] += up(r, c) * normalized(r, c);
          }
        if (ctx.wants(0)) {
          Tensor& gx = ctx.input_grad(0);
          const double n = static_cast<double>(rows);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
              gx(r, c) += gv(0, c) * inv_std[c] *
                          (up(r, c) - sum_up[c] / n -
                           normalized(r, c) * sum_up_norm[c] / n);
        }
        if (ctx.wants(1)) {
          Tensor& gg = ctx.input_grad(1);
          for (std::size_t c = 0; c < cols; ++c) gg(0, c) += sum_up_norm[c];
        }
        if (ctx.wants(2)) {
          Tensor& gb = ctx.input_grad(2);
          for (std::size_t c = 0; c < cols; ++c) gb(0, c) += sum_up[c];
        }
      });
}

Var BatchNormEval(Var x, Var gamma, Var beta, const BatchNormParams& norm) {
  Graph& g = *x.graph();
  Tensor scale = norm.running_var;
  for (std::size_t i = 0; i < scale.size(); ++i)
    scale[i] = std::sqrt(scale[i] + kBatchNormEpsilon);
  const Var centered = diff::Sub(x, g.Constant(norm.running_mean));
  const Var normalized = diff::Div(centered, g.Constant(std::move(scale)));
  return diff::Add(diff::Mul(normalized, gamma), beta);
}

Var Dropout(Var x, double p, Rng& rng) {
  const Tensor& xv = x.value();
  Tensor mask = Tensor::ZerosLike(xv);
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = UniformUnit(rng) < p ? 0.0 : keep_scale;
  return diff::Mul(x, x.graph()->Constant(std::move(mask)));
}

Var SelfAttention(Var h, const std::vector<Var>& weights, std::size_t heads) {
  const Var q = diff::MatMul(h, weights[0]);
  const Var k = diff::MatMul(h, weights[1]);
  const Var v = diff::MatMul(h, weights[2]);
  const std::size_t width = h.value().cols();
  const std::size_t head_width = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_width));
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t head = 0; head < heads; ++head) {
    const std::size_t begin = head * head_width, end = begin + head_width;
    const Var qh = diff::Slice(q, 1, begin, end);
    const Var kh = diff::Slice(k, 1, begin, end);
    const Var vh = diff::Slice(v, 1, begin, end);
    const Var attn =
        diff::Softmax(diff::Scale(diff::MatMul(qh, diff::Transpose(kh)), scale));
    outputs.push_back(diff::MatMul(attn, vh));
  }
  const Var merged = heads == 1 ? outputs.front() : diff::Concat(outputs);
  return diff::Add(h, diff::MatMul(merged, weights[3]));
}

}  // namespace

void RerankerConfig::Validate(std::size_t feature_count) const {
  if (feature_count == 0) throw InvalidArgument("reranker: feature count must be positive");
  if (n_attention_layers == 0) throw InvalidArgument("reranker: need at least one attention layer");
  if (n_heads == 0) throw InvalidArgument("reranker: n_heads must be positive");
  if (hidden_size == 0) throw InvalidArgument("reranker: hidden_size must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0))
    throw InvalidArgument("reranker: dropout_p must be in [0, 1)");
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0))
    throw InvalidArgument("reranker: bn_momentum must be in (0, 1)");
  if (!(temperature > 0.0)) throw InvalidArgument("reranker: temperature must be positive");
  const std::size_t width = ModelWidth(feature_count);
  if (width % n_heads != 0)
    throw InvalidArgument("reranker: model width " + std::to_string(width) +
                          " is not divisible by " + std::to_string(n_heads) +
                          " heads");
}

std::size_t AdaptHeadCount(std::size_t width, std::size_t requested) {
  for (std::size_t h = std::min(requested, width); h > 1; --h)
    if (width % h == 0) return h;
  return 1;
}

std::vector<Tensor*> ModelParams::Trainable() {
  std::vector<Tensor*> out{&transform_logits};
  if (!embedding.empty()) {
    out.push_back(&embedding);
    out.push_back(&embedding_bias);
  }
  for (auto& layer : attention) {
    out.push_back(&layer.query);
    out.push_back(&layer.key);
    out.push_back(&layer.value);
    out.push_back(&layer.output);
  }
  out.insert(out.end(), {&hidden_norm.gamma, &hidden_norm.beta, &hidden_weight,
                         &hidden_bias, &output_norm.gamma, &output_norm.beta,
                         &output_weight, &output_bias});
  return out;
}

std::vector<const Tensor*> ModelParams::Trainable() const {
  auto mutable_list = const_cast<ModelParams*>(this)->Trainable();
  return {mutable_list.begin(), mutable_list.end()};
}

std::vector<std::string> ModelParams::TrainableNames() const {
  std::vector<std::string> names{"transform_logits"};
  if (!embedding.empty()) {
    names.push_back("embedding");
    names.push_back("embedding_bias");
  }
  for (std::size_t l = 0; l < attention.size(); ++l)
    for (const char* part : {"query", "key", "value", "output"})
      names.push_back("attention" + std::to_string(l) + "." + part);
  names.insert(names.end(), {"hidden_norm.gamma", "hidden_norm.beta", "hidden_weight",
                             "hidden_bias", "output_norm.gamma", "output_norm.beta",
                             "output_weight", "output_bias"});
  return names;
}

bool ModelParams::AllFinite() const {
  for (const Tensor* t : Trainable())
    if (!t->AllFinite()) return false;
  return hidden_norm.running_mean.AllFinite() && hidden_norm.running_var.AllFinite() &&
         output_norm.running_mean.AllFinite() && output_norm.running_var.AllFinite();
}

ModelParams InitParams(const RerankerConfig& config, std::size_t feature_count,
                       std::uint64_t seed) {
  config.Validate(feature_count);
  Rng rng = MakeRng(seed, {0x1417});
  const std::size_t width = config.ModelWidth(feature_count);
  ModelParams p;
  p.feature_count = feature_count;
  p.transform_logits = Tensor(feature_count, 3, 0.0);
  if (config.feature_embedding > 0) {
    p.embedding = GlorotUniform(feature_count, width, rng);
    p.embedding_bias = Tensor(1, width, 0.0);
  }
  for (std::size_t l = 0; l < config.n_attention_layers; ++l) {
    AttentionParams layer;
    layer.query = GlorotUniform(width, width, rng);
    layer.key = GlorotUniform(width, width, rng);
    layer.value = GlorotUniform(width, width, rng);
    layer.output = GlorotUniform(width, width, rng);
    p.attention.push_back(std::move(layer));
  }
  p.hidden_norm = IdentityNorm(width);
  p.hidden_weight = GlorotUniform(width, config.hidden_size, rng);
  p.hidden_bias = Tensor(1, config.hidden_size, 0.0);
  p.output_norm = IdentityNorm(config.hidden_size);
  p.output_weight = GlorotUniform(config.hidden_size, 1, rng);
  p.output_bias = Tensor(1, 1, 0.0);
  return p;
}

ForwardPass Forward(Graph& graph, Var input, const ModelParams& params,
                    const RerankerConfig& config, Mode mode, Rng* dropout_rng) {
  const Tensor& x = input.value();
  if (x.rank() != 2 || x.cols() != params.feature_count)
    throw ShapeError("reranker: input shape " + x.ShapeString() + " but model expects " +
                     std::to_string(params.feature_count) + " features");
  if (x.rows() == 0) throw InvalidArgument("reranker: query without documents");
  if (params.attention.size() != config.n_attention_layers)
    throw InvalidArgument("reranker: parameters do not match configuration");
  if (mode == Mode::kTrain && config.dropout_p > 0.0 && dropout_rng == nullptr)
    throw InvalidArgument("reranker: train mode needs a dropout generator");

  ForwardPass pass;
  for (const Tensor* t : params.Trainable()) pass.params.push_back(graph.Leaf(*t));
  std::size_t next = 0;
  auto take = [&]() { return pass.params[next++]; };

  // Per-feature convex combination of three transformations.
  const Var mix = diff::Transpose(diff::Softmax(take()));  // 3 x d
  Var h = diff::Add(
      diff::Add(diff::Mul(input, diff::Slice(mix, 0, 0, 1)),
                diff::Mul(diff::SignedLog1p(input), diff::Slice(mix, 0, 1, 2))),
      diff::Mul(diff::Softsign(input), diff::Slice(mix, 0, 2, 3)));
  if (!params.embedding.empty()) {
    const Var w = take();
    const Var b = take();
    h = diff::Add(diff::MatMul(h, w), b);
  }
  pass.transformed = h;

  for (std::size_t l = 0; l < config.n_attention_layers; ++l) {
    std::vector<Var> weights{take(), take(), take(), take()};
    h = SelfAttention(h, weights, config.n_heads);
  }

  const Var hidden_gamma = take(), hidden_beta = take();
  const Var hidden_w = take(), hidden_b = take();
  const Var out_gamma = take(), out_beta = take();
  const Var out_w = take(), out_b = take();

  if (mode == Mode::kTrain) {
    pass.batch_stats.resize(2);
    h = BatchNormTrain(h, hidden_gamma, hidden_beta, pass.batch_stats[0]);
  } else {
    h = BatchNormEval(h, hidden_gamma, hidden_beta, params.hidden_norm);
  }
  h = diff::Relu(diff::Add(diff::MatMul(h, hidden_w), hidden_b));
  if (mode == Mode::kTrain && config.dropout_p > 0.0)
    h = Dropout(h, config.dropout_p, *dropout_rng);
  if (mode == Mode::kTrain) {
    h = BatchNormTrain(h, out_gamma, out_beta, pass.batch_stats[1]);
  } else {
    h = BatchNormEval(h, out_gamma, out_beta, params.output_norm);
  }
  pass.scores = diff::Add(diff::MatMul(h, out_w), out_b);
  if (!pass.scores.value().AllFinite())
    throw NumericalError("reranker: non-finite score (diverged parameters?)");
  return pass;
}

std::vector<double> Score(const ModelParams& params, const RerankerConfig& config,
                          std::span<const double> features, std::size_t docs) {
  Graph graph;
  const Var input = graph.Constant(
      Tensor(docs, params.feature_count, std::vector<double>(features.begin(), features.end())));
  const ForwardPass pass = Forward(graph, input, params, config, Mode::kEval);
  const auto values = pass.scores.value().values();
  return {values.begin(), values.end()};
}

void UpdateRunningStats(ModelParams& params, const std::vector<BatchNormStats>& stats,
                        double momentum) {
  if (stats.size() != 2) throw InvalidArgument("batch norm: expected two stat blocks");
  BatchNormParams* norms[] = {&params.hidden_norm, &params.output_norm};
  for (std::size_t n = 0; n < 2; ++n) {
    BatchNormParams& norm = *norms[n];
    for (std::size_t c = 0; c < norm.running_mean.size(); ++c) {
      norm.running_mean[c] =
          momentum * norm.running_mean[c] + (1.0 - momentum) * stats[n].mean[c];
      norm.running_var[c] =
          momentum * norm.running_var[c] + (1.0 - momentum) * stats[n].var[c];
    }
  }
}

Var ApproxNdcgLoss(Var scores, std::span<const int> labels, double temperature) {
  if (!(temperature > 0.0))
    throw InvalidArgument("approx_ndcg: temperature must be positive");
  Graph& g = *scores.graph();
  const Tensor& s = scores.value();
  if (s.rank() != 2 || s.cols() != 1 || s.rows() != labels.size())
    throw ShapeError("approx_ndcg: scores " + s.ShapeString() + " vs " +
                     std::to_string(labels.size()) + " labels");
  const double ideal = IdealDcgAtK(labels, labels.size());
  if (ideal <= 0.0) return g.Constant(Tensor::Scalar(0.0));

  const std::size_t n = labels.size();
  const Var ones_col = g.Constant(Tensor(n, 1, 1.0));
  const Var ones_row = g.Constant(Tensor(1, n, 1.0));
  // diff(i, j) = s_j - s_i
  const Var diff = diff::Sub(diff::MatMul(ones_col, diff::Transpose(scores)),
                             diff::MatMul(scores, ones_row));
  const Var pairwise = diff::Sigmoid(diff::Scale(diff, 1.0 / temperature));
  // The diagonal contributes sigmoid(0) = 0.5; 1 - 0.5 restores r_i.
  const Var rank = diff::Add(diff::Sum(pairwise, 1), g.Constant(Tensor::Scalar(0.5)));

  // (2^y - 1) / log2(1 + r) = ln2 (2^y - 1) / log1p(r)
  Tensor gains(n, 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) gains[i] = Gain(labels[i]) * std::numbers::ln2;
  const Var terms = diff::Div(g.Constant(std::move(gains)), diff::Log1p(rank));
  return diff::Scale(diff::SumAll(terms), -1.0 / ideal);
}

}  // namespace nfs

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

// Central-difference gradient checking for diffcore graphs.

#ifndef NFS_TESTS_GRAD_CHECK_H_
#define NFS_TESTS_GRAD_CHECK_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "nfs/diffcore.h"

namespace nfs::testing {

using GraphFn = std::function<diff::Var(diff::Graph&, const std::vector<diff::Var>&)>;

inline diff::Tensor RandomTensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                 double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  diff::Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

// |a - n| / max(|a|, |n|, floor); the floor keeps exactly-zero gradients
// from producing 0/0.
inline double RelativeError(double analytic, double numeric, double floor = 1e-6) {
  return std::fabs(analytic - numeric) /
         std::max({std::fabs(analytic), std::fabs(numeric), floor});
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

// Reduces fn's output to a scalar through a fixed random projection and
// compares reverse-mode gradients of every input element with central
// differences of step h.
inline GradCheckResult CheckGradients(const GraphFn& fn, const std::vector<diff::Tensor>& inputs,
                                      double h = 1e-4, std::uint64_t seed = 99) {
  diff::Tensor projection;
  auto evaluate = [&](const std::vector<diff::Tensor>& values, diff::Graph& graph,
                      std::vector<diff::Var>& leaves) {
    leaves.clear();
    for (const auto& v : values) leaves.push_back(graph.Leaf(v));
    const diff::Var out = fn(graph, leaves);
    if (projection.empty()) {
      std::mt19937_64 rng(seed);
      projection = RandomTensor(rng, out.value().rows(), out.value().cols(), 0.5, 1.5);
    }
    return diff::SumAll(diff::Mul(out, graph.Constant(projection)));
  };

  diff::Graph graph;
  std::vector<diff::Var> leaves;
  const diff::Var loss = evaluate(inputs, graph, leaves);
  graph.Backward(loss);

  GradCheckResult result;
  std::vector<diff::Tensor> shifted = inputs;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const diff::Tensor analytic = leaves[t].grad();
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      auto loss_at = [&](double delta) {
        shifted[t][i] = inputs[t][i] + delta;
        diff::Graph g;
        std::vector<diff::Var> l;
        const double value = evaluate(shifted, g, l).value().item();
        shifted[t][i] = inputs[t][i];
        return value;
      };
      const double numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
      result.max_relative_error =
          std::max(result.max_relative_error, RelativeError(analytic[i], numeric));
      ++result.checked;
    }
  }
  return result;
}

}  // namespace nfs::testing

#endif  // NFS_TESTS_GRAD_CHECK_H_

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

#include "nfs/diffcore.h"

#include <cmath>
#include <random>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "grad_check.h"
#include "nfs/errors.h"

namespace nfs::diff {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;
using nfs::testing::CheckGradients;
using nfs::testing::RandomTensor;

std::vector<double> Values(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// Values bounded away from relu's kink at 0.
Tensor AwayFromZero(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  Tensor t = RandomTensor(rng, rows, cols, 0.1, 1.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    if (rng() % 2) t[i] = -t[i];
  return t;
}

struct PrimitiveCase {
  const char* name;
  nfs::testing::GraphFn fn;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  bool avoid_zero = false;
};

std::vector<PrimitiveCase> PrimitiveCases() {
  using V = const std::vector<Var>&;
  return {
      {"add", [](Graph&, V x) { return Add(x[0], x[1]); }, {{3, 4}, {3, 4}}},
      {"add_row", [](Graph&, V x) { return Add(x[0], x[1]); }, {{3, 4}, {1, 4}}},
      {"add_scalar", [](Graph&, V x) { return Add(x[0], x[1]); }, {{3, 4}, {1, 1}}},
      {"sub_row", [](Graph&, V x) { return Sub(x[0], x[1]); }, {{3, 4}, {1, 4}}},
      {"mul", [](Graph&, V x) { return Mul(x[0], x[1]); }, {{3, 4}, {3, 4}}},
      {"mul_row", [](Graph&, V x) { return Mul(x[0], x[1]); }, {{3, 4}, {1, 4}}},
      {"div",
       [](Graph& g, V x) { return Div(x[0], Add(Mul(x[1], x[1]), g.Constant(Tensor::Scalar(0.5)))); },
       {{3, 4}, {1, 4}}},
      {"scale", [](Graph&, V x) { return Scale(x[0], -2.5); }, {{2, 3}}},
      {"matmul", [](Graph&, V x) { return MatMul(x[0], x[1]); }, {{3, 4}, {4, 2}}},
      {"transpose", [](Graph&, V x) { return Transpose(x[0]); }, {{3, 5}}},
      {"relu", [](Graph&, V x) { return Relu(x[0]); }, {{4, 4}}, true},
      {"sigmoid", [](Graph&, V x) { return Sigmoid(x[0]); }, {{3, 4}}},
      {"log1p", [](Graph&, V x) { return Log1p(Mul(x[0], x[0])); }, {{3, 4}}},
      {"signed_log1p", [](Graph&, V x) { return SignedLog1p(x[0]); }, {{3, 4}}, true},
      {"softsign", [](Graph&, V x) { return Softsign(x[0]); }, {{3, 4}}, true},
      {"softmax", [](Graph&, V x) { return Softmax(x[0]); }, {{3, 5}}},
      {"concat", [](Graph&, V x) { return Concat({x[0], x[1], x[0]}); }, {{3, 2}, {3, 3}}},
      {"slice_rows", [](Graph&, V x) { return Slice(x[0], 0, 1, 3); }, {{4, 3}}},
      {"slice_cols", [](Graph&, V x) { return Slice(x[0], 1, 2, 5); }, {{3, 6}}},
      {"sum_rows", [](Graph&, V x) { return Sum(x[0], 0); }, {{3, 4}}},
      {"sum_cols", [](Graph&, V x) { return Sum(x[0], 1); }, {{3, 4}}},
      {"mean_rows", [](Graph&, V x) { return Mean(x[0], 0); }, {{3, 4}}},
      {"mean_cols", [](Graph&, V x) { return Mean(x[0], 1); }, {{3, 4}}},
      {"sum_all", [](Graph&, V x) { return SumAll(x[0]); }, {{3, 4}}},
      {"mean_all", [](Graph&, V x) { return MeanAll(x[0]); }, {{3, 4}}},
      {"shared_node",
       [](Graph&, V x) {
         const Var s = Sigmoid(x[0]);
         return Add(Mul(s, s), MatMul(s, Transpose(s)));
       },
       {{3, 3}}},
  };
}

TEST(DiffcoreGradientTest, EveryPrimitiveMatchesFiniteDifferences) {
  std::mt19937_64 rng(1234);
  for (const auto& c : PrimitiveCases()) {
    for (int trial = 0; trial < 3; ++trial) {
      std::vector<Tensor> inputs;
      for (const auto& [r, k] : c.shapes)
        inputs.push_back(c.avoid_zero ? AwayFromZero(rng, r, k) : RandomTensor(rng, r, k));
      const auto check = CheckGradients(c.fn, inputs);
      EXPECT_LT(check.max_relative_error, 1e-4) << c.name << " trial " << trial;
    }
  }
}

TEST(DiffcoreTest, MatmulGradientAbsoluteError) {
  std::mt19937_64 rng(7);
  const Tensor a = RandomTensor(rng, 3, 4), b = RandomTensor(rng, 4, 2);
  Graph g;
  const Var va = g.Leaf(a), vb = g.Leaf(b);
  g.Backward(SumAll(MatMul(va, vb)));
  // d/da_ij sum(AB) = sum_k b_jk.
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      auto f = [&](double delta) {
        Tensor s = a;
        s(i, j) += delta;
        double total = 0.0;
        const Tensor p = MatMulValues(s, b);
        for (std::size_t q = 0; q < p.size(); ++q) total += p[q];
        return total;
      };
      EXPECT_LT(std::fabs(va.grad()(i, j) - (f(1e-4) - f(-1e-4)) / 2e-4), 1e-5);
    }
}

TEST(DiffcoreTest, AnalyticValues) {
  Graph g;
  const Var zero = g.Leaf(Tensor::Scalar(0.0));
  const Var s = Sigmoid(zero);
  EXPECT_DOUBLE_EQ(s.value().item(), 0.5);
  g.Backward(s);
  EXPECT_DOUBLE_EQ(zero.grad().item(), 0.25);

  const Var sm = Softmax(g.Constant(Tensor(1, 2, 0.0)));
  EXPECT_THAT(Values(sm.value()), ElementsAre(0.5, 0.5));
}

TEST(DiffcoreTest, SumAndSquareGradients) {
  Graph g;
  const Var x = g.Leaf(Tensor(1, 3, {1.0, 2.0, 3.0}));
  g.Backward(SumAll(x));
  EXPECT_THAT(Values(x.grad()), ElementsAre(1.0, 1.0, 1.0));
  g.Backward(SumAll(Mul(x, x)));
  EXPECT_THAT(Values(x.grad()), ElementsAre(2.0, 4.0, 6.0));
}

TEST(DiffcoreTest, FanOutAccumulates) {
  std::mt19937_64 rng(3);
  const Tensor a = RandomTensor(rng, 2, 3);
  auto grad_of = [&](auto build) {
    Graph g;
    const Var x = g.Leaf(a);
    g.Backward(build(x));
    return x.grad();
  };
  const Tensor first = grad_of([](Var x) { return SumAll(Sigmoid(x)); });
  const Tensor second = grad_of([](Var x) { return SumAll(Mul(x, x)); });
  const Tensor both = grad_of([](Var x) { return Add(SumAll(Sigmoid(x)), SumAll(Mul(x, x))); });
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(both[i], first[i] + second[i], 1e-14);
}

TEST(DiffcoreTest, ConstantsReceiveNoGradientAndUnreachedAreZero) {
  Graph g;
  const Var c = g.Constant(Tensor(2, 2, 1.0));
  const Var x = g.Leaf(Tensor(2, 2, 2.0));
  const Var unused = g.Leaf(Tensor(1, 1, 5.0));
  g.Backward(SumAll(Mul(c, x)));
  EXPECT_THAT(Values(x.grad()), ElementsAre(1.0, 1.0, 1.0, 1.0));
  EXPECT_EQ(unused.grad().item(), 0.0);
}

TEST(DiffcoreTest, ShapeErrorsNameThePrimitive) {
  Graph g;
  const Var a = g.Leaf(Tensor(2, 3));
  const Var b = g.Leaf(Tensor(2, 2));
  try {
    MatMul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_THAT(e.what(), HasSubstr("matmul"));
    EXPECT_THAT(e.what(), HasSubstr("2x3"));
    EXPECT_THAT(e.what(), HasSubstr("2x2"));
  }
  EXPECT_THROW(Add(a, b), ShapeError);
  EXPECT_THROW(Concat({a, g.Leaf(Tensor(3, 1))}), ShapeError);
  EXPECT_THROW(Slice(a, 1, 2, 5), ShapeError);
  EXPECT_THROW(g.Backward(a), InvalidArgument);
}

TEST(DiffcoreTest, ForwardIsDeterministic) {
  std::mt19937_64 rng(5);
  const Tensor a = RandomTensor(rng, 4, 4), b = RandomTensor(rng, 4, 4);
  auto run = [&] {
    Graph g;
    return Softmax(MatMul(Sigmoid(g.Leaf(a)), g.Leaf(b))).value();
  };
  EXPECT_EQ(run(), run());
}

TEST(TensorTest, ShapesAndAccessors) {
  Tensor t(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t(1, 2), 6.0);
  EXPECT_EQ(t.ShapeString(), "[2x3]");
  EXPECT_THROW(Tensor(2, 2, std::vector<double>{1.0, 2.0}), ShapeError);
  EXPECT_THROW(t.item(), ShapeError);
  Tensor cube({2, 2, 2}, std::vector<double>(8, 0.0));
  EXPECT_THROW(cube.rows(), ShapeError);
  EXPECT_THAT(Values(TransposeValues(t)), ElementsAre(1, 4, 2, 5, 3, 6));
  t[0] = std::nan("");
  EXPECT_FALSE(t.AllFinite());
}

}  // namespace
}  // namespace nfs::diff

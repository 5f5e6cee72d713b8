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

#include "nfs/metrics.h"

#include <cmath>
#include <random>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "nfs/errors.h"
#include "test_util.h"

namespace nfs {
namespace {

using ::testing::DoubleNear;
using ::testing::ElementsAre;

TEST(NdcgTest, WorkedExamples) {
  EXPECT_DOUBLE_EQ(NdcgAtK(std::vector<int>{3, 2, 0}, std::vector<double>{3, 2, 1}, 3), 1.0);
  EXPECT_NEAR(NdcgAtK(std::vector<int>{0, 1}, std::vector<double>{2, 1}, 2),
              1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(NdcgAtK(std::vector<int>{0, 1}, std::vector<double>{2, 1}, 2), 0.6309, 1e-4);
  EXPECT_EQ(NdcgAtK(std::vector<int>{0, 0, 0}, std::vector<double>{1, 2, 3}, 3), 0.0);
}

TEST(NdcgTest, TiesBreakByIndex) {
  // Equal scores keep index order: the relevant document at index 1 sits at
  // rank 2.
  EXPECT_NEAR(NdcgAtK(std::vector<int>{0, 1}, std::vector<double>{1, 1}, 2),
              1.0 / std::log2(3.0), 1e-12);
  EXPECT_THAT(RankOrder(std::vector<double>{1, 3, 3, 0}), ElementsAre(1, 2, 0, 3));
}

TEST(NdcgTest, RejectsLengthMismatch) {
  EXPECT_THROW(NdcgAtK(std::vector<int>{1}, std::vector<double>{1, 2}, 1), InvalidArgument);
  EXPECT_THROW(AveragePrecision(std::vector<int>{1}, std::vector<double>{1, 2}),
               InvalidArgument);
}

TEST(NdcgTest, MatchesReferenceOnRandomLists) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> label(0, 4);
  std::uniform_int_distribution<int> coarse(0, 5);  // forces ties
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = rng() % 15 + 1;
    std::vector<int> labels(n);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = label(rng);
      scores[i] = coarse(rng);
    }
    const std::size_t k = rng() % 12 + 1;
    ASSERT_NEAR(NdcgAtK(labels, scores, k), testing::ReferenceNdcg(labels, scores, k), 1e-12);
  }
}

TEST(NdcgTest, InvariantToIncreasingTransforms) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> labels(10);
    std::vector<double> scores(10), transformed(10);
    for (int i = 0; i < 10; ++i) {
      labels[i] = static_cast<int>(rng() % 4);
      scores[i] = normal(rng);
      transformed[i] = std::exp(2.0 * scores[i]) + 5.0;
    }
    ASSERT_EQ(NdcgAtK(labels, scores, 5), NdcgAtK(labels, transformed, 5));
  }
}

TEST(NdcgTest, IdealScoresGiveOne) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> labels(8);
    for (auto& l : labels) l = static_cast<int>(rng() % 5);
    labels[rng() % 8] = 1;
    std::vector<double> ideal(labels.begin(), labels.end());
    ASSERT_DOUBLE_EQ(NdcgAtK(labels, ideal, 1 + rng() % 8), 1.0);
  }
}

TEST(MeanNdcgTest, ExcludesUnjudgedQueries) {
  const QuerySet qs = ParseLetor(
      "1 qid:1 1:0\n0 qid:1 1:0\n"
      "0 qid:2 1:0\n0 qid:2 1:0\n"
      "1 qid:3 1:0\n0 qid:3 1:0\n");
  // Query 1 ranks its relevant document first, query 3 second.
  const std::vector<std::vector<double>> scores = {{2, 1}, {1, 2}, {1, 2}};
  const double second = 1.0 / std::log2(3.0);
  EXPECT_NEAR(MeanNdcgAtK(qs, scores, 2), (1.0 + second) / 2.0, 1e-12);
  EXPECT_THROW(MeanNdcgAtK(qs, {{2, 1}}, 2), InvalidArgument);
}

TEST(MeanNdcgTest, SyntheticRankedByLabelsIsPerfect) {
  const QuerySet qs = GenerateSynthetic({}).data;
  std::vector<std::vector<double>> scores;
  for (const auto& q : qs.queries) {
    const auto labels = q.Labels();
    scores.emplace_back(labels.begin(), labels.end());
  }
  EXPECT_DOUBLE_EQ(MeanNdcgAtK(qs, scores, 3), 1.0);
}

TEST(AveragePrecisionTest, WorkedExamples) {
  EXPECT_DOUBLE_EQ(AveragePrecision(std::vector<int>{1, 0}, std::vector<double>{2, 1}), 1.0);
  EXPECT_DOUBLE_EQ(AveragePrecision(std::vector<int>{0, 1}, std::vector<double>{2, 1}), 0.5);
  EXPECT_DOUBLE_EQ(AveragePrecision(std::vector<int>{0, 0}, std::vector<double>{2, 1}), 0.0);
  // Relevant at ranks 1 and 3: (1/1 + 2/3) / 2.
  EXPECT_DOUBLE_EQ(AveragePrecision(std::vector<int>{2, 0, 1}, std::vector<double>{3, 2, 1}),
                   (1.0 + 2.0 / 3.0) / 2.0);
}

TEST(KendallTest, WorkedExamples) {
  EXPECT_DOUBLE_EQ(KendallTau(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}).value,
                   1.0);
  EXPECT_DOUBLE_EQ(KendallTau(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}).value,
                   -1.0);
  EXPECT_NEAR(
      KendallTau(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}).value,
      2.0 / 3.0, 1e-9);
}

TEST(KendallTest, ConstantInputIsFlagged) {
  const Correlation c = KendallTau(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3});
  EXPECT_FALSE(c.defined);
  EXPECT_EQ(c.value, 0.0);
  EXPECT_THROW(KendallTau(std::vector<double>{1}, std::vector<double>{1}), InvalidArgument);
  EXPECT_THROW(KendallTau(std::vector<double>{1, 2}, std::vector<double>{1}), InvalidArgument);
}

TEST(KendallTest, MatchesPairEnumerationWithTies) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng() % 40 + 2;
    const int levels = static_cast<int>(rng() % 6) + 2;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % levels);
      y[i] = static_cast<double>(rng() % levels);
    }
    const Correlation fast = KendallTau(x, y);
    if (!fast.defined) continue;
    ASSERT_NEAR(fast.value, testing::ReferenceKendall(x, y), 1e-12);
    ASSERT_NEAR(fast.value, KendallTau(y, x).value, 1e-12);
  }
}

TEST(SpearmanTest, WorkedExamples) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(Spearman(x, x).value, 1.0);
  EXPECT_DOUBLE_EQ(Spearman(x, std::vector<double>{5, 4, 3, 2, 1}).value, -1.0);
  EXPECT_NEAR(Spearman(x, std::vector<double>{1, 2, 3, 5, 4}).value, 0.9, 1e-9);
  EXPECT_FALSE(Spearman(x, std::vector<double>{2, 2, 2, 2, 2}).defined);
}

TEST(SpearmanTest, AverageRanksShareTies) {
  EXPECT_THAT(AverageRanks(std::vector<double>{10, 20, 10, 5}), ElementsAre(2.5, 4, 2.5, 1));
}

TEST(CorrelationTest, SymmetricAndRankInvariant) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(25), y(25), fx(25), gy(25);
    for (int i = 0; i < 25; ++i) {
      x[i] = normal(rng);
      y[i] = x[i] + normal(rng);
      fx[i] = std::exp(x[i]);
      gy[i] = y[i] * y[i] * y[i] + 1.0;
    }
    ASSERT_NEAR(KendallTau(x, y).value, KendallTau(y, x).value, 1e-12);
    ASSERT_NEAR(Spearman(x, y).value, Spearman(y, x).value, 1e-12);
    ASSERT_NEAR(KendallTau(x, y).value, KendallTau(fx, gy).value, 1e-12);
    ASSERT_NEAR(Spearman(x, y).value, Spearman(fx, gy).value, 1e-12);
  }
}

}  // namespace
}  // namespace nfs

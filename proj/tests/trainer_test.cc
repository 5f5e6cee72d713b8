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
#include <random>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "nfs/errors.h"
#include "nfs/metrics.h"
#include "test_util.h"

namespace nfs {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;

QuerySet Synthetic(std::uint64_t seed, std::size_t queries = 50) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.n_queries = queries;
  return GenerateSynthetic(spec).data;
}

TrainConfig QuickTrain(std::size_t epochs) {
  TrainConfig config;
  config.epochs = epochs;
  config.learning_rate = 5e-3;
  config.seed = 3;
  return config;
}

RerankerConfig SmallReranker() {
  RerankerConfig config;
  config.hidden_size = 16;
  return config;
}

TEST(StandardizerTest, ConstantAndTwoPointColumns) {
  const QuerySet qs = ParseLetor("1 qid:1 1:1 2:0\n0 qid:1 1:1 2:2\n0 qid:2 1:1 2:0\n"
                                 "1 qid:2 1:1 2:2\n");
  const auto [standardized, s] = Standardize(qs);
  EXPECT_THAT(s.stddev, ElementsAre(0.0, 1.0));
  EXPECT_THAT(standardized.queries[0].documents[0].features, ElementsAre(0.0, -1.0));
  EXPECT_THAT(standardized.queries[0].documents[1].features, ElementsAre(0.0, 1.0));
}

TEST(StandardizerTest, IdempotentAndMomentsNormalized) {
  const QuerySet qs = testing::RandomQuerySet(2, 10, 8, 5);
  const auto [once, s1] = Standardize(qs);
  const auto [twice, s2] = Standardize(once);
  for (std::size_t q = 0; q < once.queries.size(); ++q)
    for (std::size_t r = 0; r < once.queries[q].documents.size(); ++r)
      for (std::size_t j = 0; j < 5; ++j)
        ASSERT_NEAR(once.queries[q].documents[r].features[j],
                    twice.queries[q].documents[r].features[j], 1e-9);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_NEAR(s2.mean[j], 0.0, 1e-12);
    EXPECT_NEAR(s2.stddev[j], 1.0, 1e-12);
  }
}

TEST(AdamTest, ZeroGradientDecaysMoments) {
  diff::Tensor p(1, 2, {1.0, -2.0});
  AdamState state{{diff::Tensor(1, 2, {0.5, 0.5})}, {diff::Tensor(1, 2, {0.25, 0.25})}, 3};
  std::vector<diff::Tensor*> params{&p};
  AdamStep(params, std::vector<diff::Tensor>{diff::Tensor(1, 2, 0.0)}, state, 0.1, 0.9, 0.999,
           1e-8);
  EXPECT_EQ(state.step, 4u);
  EXPECT_DOUBLE_EQ(state.first[0][0], 0.45);
  EXPECT_DOUBLE_EQ(state.second[0][0], 0.999 * 0.25);
  EXPECT_NE(p[0], 1.0);

  diff::Tensor q(1, 1, 4.0);
  AdamState zero{{diff::Tensor(1, 1, 0.0)}, {diff::Tensor(1, 1, 0.0)}, 0};
  std::vector<diff::Tensor*> qs{&q};
  AdamStep(qs, std::vector<diff::Tensor>{diff::Tensor(1, 1, 0.0)}, zero, 0.1, 0.9, 0.999, 1e-8);
  EXPECT_EQ(q[0], 4.0);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  diff::Tensor p(1, 1, 0.0);
  AdamState state{{diff::Tensor(1, 1, 0.0)}, {diff::Tensor(1, 1, 0.0)}, 0};
  std::vector<diff::Tensor*> params{&p};
  AdamStep(params, std::vector<diff::Tensor>{diff::Tensor(1, 1, 1.0)}, state, 0.1, 0.9, 0.999,
           1e-8);
  EXPECT_NEAR(p[0], -0.1, 1e-7);
}

TEST(AdamTest, RejectsNonFiniteGradients) {
  diff::Tensor p(1, 1, 0.0);
  AdamState state{{diff::Tensor(1, 1, 0.0)}, {diff::Tensor(1, 1, 0.0)}, 0};
  std::vector<diff::Tensor*> params{&p};
  EXPECT_THROW(AdamStep(params, std::vector<diff::Tensor>{diff::Tensor(1, 1, std::nan(""))},
                        state, 0.1, 0.9, 0.999, 1e-8),
               NumericalError);
  EXPECT_EQ(p[0], 0.0);
  EXPECT_EQ(state.step, 0u);
}

TEST(BatchGradientTest, MatchesFiniteDifferencesOfMeanLoss) {
  RerankerConfig config = SmallReranker();
  config.hidden_size = 4;
  config.dropout_p = 0.0;
  const QuerySet qs = Standardize(testing::RandomQuerySet(5, 3, 5, 3)).first;
  ModelParams params = InitParams(config, 3, 5);
  std::vector<const Query*> batch;
  for (const auto& q : qs.queries) batch.push_back(&q);
  const BatchGradient grad =
      ComputeBatchGradient(params, config, batch, 1, 0, 0, Execution::kSerial);
  auto mean_loss = [&](const ModelParams& p) {
    return ComputeBatchGradient(p, config, batch, 1, 0, 0, Execution::kSerial).loss;
  };
  auto trainable = params.Trainable();
  double worst = 0.0;
  for (std::size_t t = 0; t < trainable.size(); ++t)
    for (std::size_t i = 0; i < trainable[t]->size(); ++i) {
      const double original = (*trainable[t])[i];
      (*trainable[t])[i] = original + 1e-5;
      const double up = mean_loss(params);
      (*trainable[t])[i] = original - 1e-5;
      const double down = mean_loss(params);
      (*trainable[t])[i] = original;
      const double numeric = (up - down) / 2e-5;
      worst = std::max(worst, std::fabs(grad.grads[t][i] - numeric) /
                                  std::max({std::fabs(numeric), std::fabs(grad.grads[t][i]), 1e-6}));
    }
  EXPECT_LT(worst, 1e-3);
}

TEST(TrainTest, LearnsSyntheticSignal) {
  const QuerySet train = Synthetic(1), valid = Synthetic(2);
  const TrainResult result = Train(train, valid, SmallReranker(), QuickTrain(60));
  ASSERT_EQ(result.history.size(), 60u);
  const double trained = MeanNdcgAtK(valid, result.model.ScoreAll(valid), 3);
  EXPECT_DOUBLE_EQ(trained, result.history.back().valid_ndcg3);

  TrainedModel untrained = result.model;
  untrained.params = InitParams(untrained.config, train.feature_count, 99);
  std::mt19937_64 rng(4);
  std::vector<std::vector<double>> random_scores;
  for (const auto& q : valid.queries) {
    std::vector<double> s(q.documents.size());
    for (auto& v : s) v = std::uniform_real_distribution<double>()(rng);
    random_scores.push_back(s);
  }
  const double random = MeanNdcgAtK(valid, random_scores, 3);
  EXPECT_GT(trained - random, 0.1);
  EXPECT_GT(trained - MeanNdcgAtK(valid, untrained.ScoreAll(valid), 3), 0.1);
}

TEST(TrainTest, ShuffledLabelsGiveNoGain) {
  auto shuffled = [](QuerySet qs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& q : qs.queries) {
      auto labels = q.Labels();
      std::shuffle(labels.begin(), labels.end(), rng);
      for (std::size_t r = 0; r < labels.size(); ++r) q.documents[r].label = labels[r];
    }
    return qs;
  };
  const QuerySet train = shuffled(Synthetic(3), 1), valid = shuffled(Synthetic(4, 400), 2);
  const TrainResult result = Train(train, valid, SmallReranker(), QuickTrain(60));
  const double trained = MeanNdcgAtK(valid, result.model.ScoreAll(valid), 3);
  double random = 0.0;
  std::mt19937_64 rng(5);
  for (int draw = 0; draw < 20; ++draw) {
    std::vector<std::vector<double>> scores;
    for (const auto& q : valid.queries) {
      std::vector<double> s(q.documents.size());
      for (auto& v : s) v = std::uniform_real_distribution<double>()(rng);
      scores.push_back(s);
    }
    random += MeanNdcgAtK(valid, scores, 3) / 20.0;
  }
  EXPECT_LT(trained - random, 0.05);
}

// Without dropout every epoch may rise by at most 5% over the previous one.
// With dropout and one optimizer step per epoch, single epochs are noisy, so
// each epoch is held to the first epoch's loss within the same tolerance.
TEST(TrainTest, LossDoesNotRiseEarly) {
  for (double dropout : {0.0, 0.5}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      RerankerConfig reranker;
      reranker.dropout_p = dropout;
      TrainConfig config;
      config.epochs = 10;
      config.seed = seed;
      const auto history = Train(Synthetic(seed), QuerySet{{}, 13}, reranker, config).history;
      for (std::size_t e = 1; e < history.size(); ++e) {
        const double reference = dropout == 0.0 ? history[e - 1].mean_loss : history[0].mean_loss;
        EXPECT_LE(history[e].mean_loss, reference + 0.05 * std::fabs(reference))
            << "dropout " << dropout << " seed " << seed << " epoch " << e + 1;
      }
      EXPECT_LT(history.back().mean_loss, history[0].mean_loss);
    }
  }
}

TEST(TrainTest, DeterministicGivenSeed) {
  const QuerySet train = Synthetic(6), valid = Synthetic(7);
  TrainConfig config = QuickTrain(4);
  config.batch_size = 16;
  const TrainResult a = Train(train, valid, SmallReranker(), config);
  const TrainResult b = Train(train, valid, SmallReranker(), config);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.model, b.model);
  config.seed = 4;
  EXPECT_NE(Train(train, valid, SmallReranker(), config).model, a.model);
}

TEST(TrainTest, ResumeMatchesUninterruptedRun) {
  const QuerySet train = Synthetic(8), valid = Synthetic(9);
  TrainConfig config = QuickTrain(6);
  config.batch_size = 20;
  const TrainResult straight = Train(train, valid, SmallReranker(), config);

  Trainer first(train, valid, SmallReranker(), config);
  for (int e = 0; e < 3; ++e) first.RunEpoch();
  const TrainingCheckpoint restored = CheckpointFromString(CheckpointToString(first.checkpoint()));
  EXPECT_EQ(restored, first.checkpoint());
  Trainer second(train, valid, restored);
  while (!second.Done()) second.RunEpoch();
  EXPECT_EQ(second.model(), straight.model);
  EXPECT_EQ(second.history(), straight.history);
}

TEST(TrainTest, DivergenceNamesEpochAndBatch) {
  QuerySet train = testing::RandomQuerySet(10, 4, 5, 3);
  train.queries[0].documents[0].features[0] = 1e308;
  train.queries[1].documents[0].features[0] = 1e308;
  try {
    Train(train, QuerySet{{}, 3}, SmallReranker(), QuickTrain(2));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_THAT(e.what(), HasSubstr("epoch 1"));
    EXPECT_THAT(e.what(), HasSubstr("batch 1"));
  }
}

TEST(TrainTest, RejectsInvalidConfigurations) {
  const QuerySet train = Synthetic(10);
  TrainConfig config = QuickTrain(0);
  EXPECT_THROW(Train(train, QuerySet{{}, 13}, SmallReranker(), config), InvalidArgument);
  config = QuickTrain(1);
  config.adam_beta1 = 1.0;
  EXPECT_THROW(Train(train, QuerySet{{}, 13}, SmallReranker(), config), InvalidArgument);
  EXPECT_THROW(Train(train, QuerySet{{}, 12}, SmallReranker(), QuickTrain(1)), InvalidArgument);
}

TEST(CheckpointTest, FileRoundTripIsBitExact) {
  testing::TempDir dir;
  const TrainResult result = Train(Synthetic(11), QuerySet{{}, 13}, SmallReranker(), QuickTrain(2));
  Trainer trainer(Synthetic(11), QuerySet{{}, 13}, SmallReranker(), QuickTrain(2));
  trainer.RunEpoch();
  SaveCheckpoint(trainer.checkpoint(), dir.File("model.json"));
  EXPECT_EQ(LoadCheckpoint(dir.File("model.json")), trainer.checkpoint());
  EXPECT_THROW(LoadCheckpoint(dir.File("missing.json")), DataError);
  EXPECT_THROW(CheckpointFromString("{\"format\": \"other\"}"), DataError);
  EXPECT_THROW(CheckpointFromString("not json"), DataError);
}

}  // namespace
}  // namespace nfs

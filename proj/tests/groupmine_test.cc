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

#include "nfs/groupmine.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "nfs/errors.h"

namespace nfs {
namespace {

double Mean(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double Variance(const std::vector<std::size_t>& v) {
  const double m = Mean(v);
  double s = 0.0;
  for (std::size_t x : v) s += (static_cast<double>(x) - m) * (static_cast<double>(x) - m);
  return s / static_cast<double>(v.size() - 1);
}

TEST(GroupMatchProbabilityTest, ClosedForm) {
  EXPECT_NEAR(GroupMatchProbability(1, 1, 0.95), 0.05, 1e-15);
  EXPECT_NEAR(GroupMatchProbability(13, 2, 0.95), 0.05 * 0.05 * std::pow(0.95, 11), 1e-15);
  EXPECT_NEAR(GroupMatchProbability(4, 4, 0.5), 1.0 / 16.0, 1e-15);
  // Summed over every non-empty subset, the probabilities cover all maps but
  // the empty one.
  double total = 0.0;
  for (std::size_t s = 1; s <= 6; ++s) {
    double subsets = 1.0;
    for (std::size_t i = 0; i < s; ++i) subsets = subsets * (6 - i) / (i + 1);
    total += subsets * GroupMatchProbability(6, s, 0.7);
  }
  EXPECT_NEAR(total, 1.0 - std::pow(0.7, 6), 1e-12);
}

TEST(RandomGroupFrequenciesTest, SamplersAgreeWithBinomialMoments) {
  const std::vector<FeatureGroup> targets = {{0}, {1, 2}, {0, 1, 2}};
  const std::size_t d = 3, maps = 400, datasets = 2000;
  for (NullSampling sampling : {NullSampling::kBinomial, NullSampling::kLiteral}) {
    const auto counts = RandomGroupFrequencies(d, maps, datasets, 0.8, 21, targets, sampling);
    ASSERT_EQ(counts.size(), targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
      ASSERT_EQ(counts[t].size(), datasets);
      const double p = GroupMatchProbability(d, targets[t].size(), 0.8);
      const double mean = maps * p, var = maps * p * (1 - p);
      EXPECT_NEAR(Mean(counts[t]), mean, 5.0 * std::sqrt(var / datasets)) << t;
      EXPECT_NEAR(Variance(counts[t]), var, 0.15 * var) << t;
    }
  }
}

TEST(RandomGroupFrequenciesTest, SeededAndDuplicateSafe) {
  const std::vector<FeatureGroup> targets = {{0}, {0}, {1}};
  const auto a = RandomGroupFrequencies(4, 50, 30, 0.9, 5, targets, NullSampling::kLiteral);
  EXPECT_EQ(a, RandomGroupFrequencies(4, 50, 30, 0.9, 5, targets, NullSampling::kLiteral));
  EXPECT_EQ(a[0], a[1]);
  EXPECT_NE(a, RandomGroupFrequencies(4, 50, 30, 0.9, 6, targets, NullSampling::kLiteral));
  const auto b = RandomGroupFrequencies(4, 50, 30, 0.9, 5, targets);
  EXPECT_EQ(b, RandomGroupFrequencies(4, 50, 30, 0.9, 5, targets));
}

TEST(RandomGroupFrequenciesTest, RejectsBadTargets) {
  EXPECT_THROW(RandomGroupFrequencies(3, 10, 10, 0.9, 0, {}), InvalidArgument);
  EXPECT_THROW(RandomGroupFrequencies(3, 10, 10, 0.9, 0, {{}}), InvalidArgument);
  EXPECT_THROW(RandomGroupFrequencies(3, 10, 10, 0.9, 0, {{3}}), InvalidArgument);
  EXPECT_THROW(RandomGroupFrequencies(3, 10, 10, 1.0, 0, {{1}}), InvalidArgument);
}

FeatureGroupSet Planted() {
  FeatureGroupSet set;
  set.feature_count = 13;
  set.maps_total = 1000;
  set.groups[{0, 1}] = 30;  // expected null count about 1.4
  set.groups[{5}] = 1;      // expected null count about 27
  set.groups[{2}] = 33;     // above the null mean but not rare
  set.groups[{3}] = 80;
  return set;
}

TEST(PruneTest, KeepsOnlyRareGroups) {
  NullModelConfig config;
  config.datasets = 1000;
  const PruneResult result = Prune(Planted(), config);
  ASSERT_EQ(result.verdicts.size(), 4u);
  EXPECT_EQ(result.survivors.maps_total, 1000u);
  EXPECT_EQ(result.survivors.feature_count, 13u);
  EXPECT_TRUE(result.survivors.groups.contains({0, 1}));
  EXPECT_TRUE(result.survivors.groups.contains({3}));
  EXPECT_FALSE(result.survivors.groups.contains({5}));
  EXPECT_FALSE(result.survivors.groups.contains({2}));
}

TEST(PruneTest, VerdictsMatchIndependentExceedanceCount) {
  NullModelConfig config;
  config.datasets = 400;
  config.seed = 9;
  const FeatureGroupSet real = Planted();
  for (NullSampling sampling : {NullSampling::kBinomial, NullSampling::kLiteral}) {
    const PruneResult result = Prune(real, config, sampling);
    std::vector<FeatureGroup> targets;
    for (const auto& [g, c] : real.groups) targets.push_back(g);
    const auto null = RandomGroupFrequencies(13, 1000, 400, 0.95, 9, targets, sampling);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const auto& v = result.verdicts[t];
      EXPECT_EQ(v.group, targets[t]);
      EXPECT_EQ(v.count, real.groups.at(targets[t]));
      std::size_t exceed = 0;
      for (std::size_t c : null[t]) exceed += c >= v.count ? 1 : 0;
      EXPECT_EQ(v.exceedances, exceed);
      EXPECT_EQ(v.survives, exceed <= 8);  // alpha * K = 0.02 * 400
      EXPECT_EQ(result.survivors.groups.contains(v.group), v.survives);
    }
  }
}

TEST(PruneTest, AlphaOneKeepsEverything) {
  NullModelConfig config;
  config.datasets = 50;
  config.alpha = 1.0;
  EXPECT_EQ(Prune(Planted(), config).survivors.groups, Planted().groups);
}

TEST(PruneTest, ValidatesInput) {
  NullModelConfig config;
  FeatureGroupSet empty;
  empty.feature_count = 3;
  EXPECT_THROW(Prune(empty, config), InvalidArgument);
  empty.maps_total = 5;
  EXPECT_TRUE(Prune(empty, config).survivors.groups.empty());
  config.datasets = 0;
  EXPECT_THROW(Prune(Planted(), config), InvalidArgument);
  config = NullModelConfig{};
  config.alpha = 0.0;
  EXPECT_THROW(Prune(Planted(), config), InvalidArgument);
  config = NullModelConfig{};
  config.threshold = 1.0;
  EXPECT_THROW(Prune(Planted(), config), InvalidArgument);
}

TEST(GroupReportTest, RoundTrip) {
  NullModelConfig config;
  config.datasets = 100;
  const PruneResult result = Prune(Planted(), config);
  std::stringstream all, kept;
  WriteGroupReport(result.verdicts, all, false);
  WriteGroupReport(result.verdicts, kept, true);
  EXPECT_EQ(ReadGroupReport(all, 13, 1000), Planted());
  EXPECT_EQ(ReadGroupReport(kept, 13, 1000), result.survivors);
}

TEST(GroupReportTest, ParsesAndRejects) {
  std::istringstream ok("# header\n1,2\t3\t0\n\n2,1\t2\n4\t0\n");
  const FeatureGroupSet set = ReadGroupReport(ok, 4, 10);
  EXPECT_EQ(set.groups.size(), 1u);
  EXPECT_EQ(set.groups.at({0, 1}), 5u);
  std::istringstream no_tab("1,2 3\n");
  EXPECT_THROW(ReadGroupReport(no_tab, 4, 10), DataError);
  std::istringstream too_big("5\t1\n");
  EXPECT_THROW(ReadGroupReport(too_big, 4, 10), DataError);
  std::istringstream bad_count("1\tx\n");
  EXPECT_THROW(ReadGroupReport(bad_count, 4, 10), DataError);
}

}  // namespace
}  // namespace nfs

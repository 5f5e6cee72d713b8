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

// LETOR-format query sets: parsing, serialization, top-k restriction and
// synthetic datasets with known feature roles.

#ifndef NFS_DATA_H_
#define NFS_DATA_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace nfs {

// Relevance grades above this are clamped so 2^label stays finite.
inline constexpr int kMaxLabel = 31;

struct Document {
  std::vector<double> features;
  int label = 0;
  std::string doc_id;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Query {
  std::string qid;
  std::vector<Document> documents;

  std::vector<int> Labels() const;
  // Row-major docs x feature_count copy of the feature vectors.
  std::vector<double> FeatureMatrix() const;
  bool HasRelevant() const;

  friend bool operator==(const Query&, const Query&) = default;
};

struct QuerySet {
  std::vector<Query> queries;
  std::size_t feature_count = 0;

  std::size_t DocumentCount() const;
  // Throws DataError if any invariant (feature length, unique qids,
  // non-empty queries, non-negative labels) is broken.
  void Validate() const;

  friend bool operator==(const QuerySet&, const QuerySet&) = default;
};

// Parses `<label> qid:<qid> <fid>:<value> ... [# comment]` lines. Feature ids
// are 1-based; absent ids read as 0.0. Rows sharing a qid are grouped in
// first-appearance order. Throws DataError with the offending line number.
QuerySet ParseLetor(std::istream& in);
QuerySet ParseLetor(const std::string& text);
QuerySet LoadLetor(const std::string& path);

// Dense LETOR rendering with shortest round-trip number formatting.
void WriteLetor(const QuerySet& qs, std::ostream& out);
std::string SerializeLetor(const QuerySet& qs);
void SaveLetor(const QuerySet& qs, const std::string& path);

using CandidateLists = std::map<std::string, std::vector<std::size_t>>;

// Reads `qid<TAB>idx,idx,...` lines (0-based document indices).
CandidateLists ParseCandidates(std::istream& in);
CandidateLists LoadCandidates(const std::string& path);

// Keeps at most k documents per listed query, in candidate order. Queries
// without a candidate list are kept whole.
QuerySet RestrictTopK(const QuerySet& qs, const CandidateLists& candidates,
                      std::size_t k);

// Projects every document onto `features` (0-based ids, in the given order).
QuerySet SelectFeatures(const QuerySet& qs,
                        const std::vector<std::size_t>& features);

enum class FeatureRole { kInformative, kDuplicate, kNoise };

struct FeatureTruth {
  FeatureRole role = FeatureRole::kNoise;
  // Index of the informative parent for kInformative (itself) and
  // kDuplicate; -1 for noise.
  int family = -1;

  friend bool operator==(const FeatureTruth&, const FeatureTruth&) = default;
};

struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::size_t n_queries = 50;
  std::size_t docs_per_query = 20;
  std::size_t informative = 3;
  std::size_t duplicates_per_informative = 2;
  std::size_t noise = 4;
};

struct SyntheticDataset {
  QuerySet data;
  std::vector<FeatureTruth> truth;
};

// Layout: informative parents first, then the duplicates of parent 0, of
// parent 1, ..., then the noise features. Labels are a fixed monotone
// function of the informative features plus bounded noise, so datasets drawn
// with different seeds share one distribution.
SyntheticDataset GenerateSynthetic(const SyntheticSpec& spec);

// `fid<TAB>role<TAB>family` with 1-based ids (family 0 for noise).
void WriteTruth(const std::vector<FeatureTruth>& truth, std::ostream& out);

}  // namespace nfs

#endif  // NFS_DATA_H_

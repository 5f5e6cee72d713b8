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

#include "nfs/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "nfs/errors.h"
#include "nfs/random.h"
#include "spdlog/spdlog.h"

namespace nfs {

namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> SplitWhitespace(std::string_view s) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) tokens.push_back(s.substr(start, i - start));
  }
  return tokens;
}

template <typename T>
bool ParseNumber(std::string_view token, T& out) {
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

[[noreturn]] void Malformed(std::size_t line_number, const std::string& what) {
  throw DataError("line " + std::to_string(line_number) + ": " + what);
}

void AppendNumber(std::string& out, double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

}  // namespace

std::vector<int> Query::Labels() const {
  std::vector<int> labels;
  labels.reserve(documents.size());
  for (const auto& doc : documents) labels.push_back(doc.label);
  return labels;
}

std::vector<double> Query::FeatureMatrix() const {
  std::vector<double> matrix;
  if (documents.empty()) return matrix;
  matrix.reserve(documents.size() * documents.front().features.size());
  for (const auto& doc : documents)
    matrix.insert(matrix.end(), doc.features.begin(), doc.features.end());
  return matrix;
}

bool Query::HasRelevant() const {
  return std::any_of(documents.begin(), documents.end(),
                     [](const Document& d) { return d.label > 0; });
}

std::size_t QuerySet::DocumentCount() const {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.documents.size();
  return n;
}

void QuerySet::Validate() const {
  if (feature_count == 0) throw DataError("query set has no features");
  std::unordered_map<std::string, int> seen;
  for (const auto& q : queries) {
    if (q.documents.empty()) throw DataError("query " + q.qid + " has no documents");
    if (!seen.emplace(q.qid, 0).second) throw DataError("duplicate qid " + q.qid);
    for (const auto& doc : q.documents) {
      if (doc.features.size() != feature_count)
        throw DataError("query " + q.qid + ": feature vector length " +
                        std::to_string(doc.features.size()) + " != " +
                        std::to_string(feature_count));
      if (doc.label < 0) throw DataError("query " + q.qid + ": negative label");
    }
  }
}

QuerySet ParseLetor(std::istream& in) {
  struct Row {
    std::size_t query;
    Document doc;
    std::vector<std::pair<std::size_t, double>> sparse;
  };
  std::vector<Row> rows;
  QuerySet qs;
  std::unordered_map<std::string, std::size_t> query_index;
  std::size_t max_fid = 0;
  std::size_t capped = 0;

  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::string_view body = line;
    std::string_view comment;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) {
      comment = Trim(body.substr(hash + 1));
      body = body.substr(0, hash);
    }
    const auto tokens = SplitWhitespace(body);
    if (tokens.empty()) continue;
    if (tokens.size() < 2) Malformed(line_number, "expected '<label> qid:<id> ...'");

    Row row;
    int label = 0;
    if (!ParseNumber(tokens[0], label))
      Malformed(line_number, "non-numeric label '" + std::string(tokens[0]) + "'");
    if (label < 0) Malformed(line_number, "negative label");
    if (label > kMaxLabel) {
      label = kMaxLabel;
      ++capped;
    }
    row.doc.label = label;
    row.doc.doc_id = std::string(comment);

    if (tokens[1].substr(0, 4) != "qid:" || tokens[1].size() == 4)
      Malformed(line_number, "expected qid:<id>, got '" + std::string(tokens[1]) + "'");
    const std::string qid(tokens[1].substr(4));
    auto [it, inserted] = query_index.emplace(qid, qs.queries.size());
    if (inserted) qs.queries.push_back(Query{qid, {}});
    row.query = it->second;

    for (std::size_t t = 2; t < tokens.size(); ++t) {
      const auto token = tokens[t];
      const auto colon = token.find(':');
      if (colon == std::string_view::npos)
        Malformed(line_number, "expected <fid>:<value>, got '" + std::string(token) + "'");
      std::size_t fid = 0;
      double value = 0.0;
      if (!ParseNumber(token.substr(0, colon), fid) || fid == 0)
        Malformed(line_number, "bad feature id in '" + std::string(token) + "'");
      if (!ParseNumber(token.substr(colon + 1), value) || !std::isfinite(value))
        Malformed(line_number, "non-numeric value in '" + std::string(token) + "'");
      row.sparse.emplace_back(fid - 1, value);
      max_fid = std::max(max_fid, fid);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("empty input: no documents");
  if (max_fid == 0) throw DataError("no features in input");
  if (capped > 0)
    spdlog::warn("{} relevance labels above {} were capped", capped, kMaxLabel);

  qs.feature_count = max_fid;
  for (auto& row : rows) {
    row.doc.features.assign(max_fid, 0.0);
    std::vector<bool> set(max_fid, false);
    for (const auto& [index, value] : row.sparse) {
      if (set[index])
        throw DataError("query " + qs.queries[row.query].qid +
                        ": feature " + std::to_string(index + 1) +
                        " given twice in one row");
      set[index] = true;
      row.doc.features[index] = value;
    }
    qs.queries[row.query].documents.push_back(std::move(row.doc));
  }
  return qs;
}

QuerySet ParseLetor(const std::string& text) {
  std::istringstream in(text);
  return ParseLetor(in);
}

QuerySet LoadLetor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return ParseLetor(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void WriteLetor(const QuerySet& qs, std::ostream& out) {
  std::string line;
  for (const auto& q : qs.queries) {
    for (const auto& doc : q.documents) {
      line.clear();
      line += std::to_string(doc.label);
      line += " qid:";
      line += q.qid;
      for (std::size_t j = 0; j < doc.features.size(); ++j) {
        line += ' ';
        line += std::to_string(j + 1);
        line += ':';
        AppendNumber(line, doc.features[j]);
      }
      if (!doc.doc_id.empty()) {
        line += " # ";
        line += doc.doc_id;
      }
      line += '\n';
      out << line;
    }
  }
}

std::string SerializeLetor(const QuerySet& qs) {
  std::ostringstream out;
  WriteLetor(qs, out);
  return out.str();
}

void SaveLetor(const QuerySet& qs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  WriteLetor(qs, out);
}

CandidateLists ParseCandidates(std::istream& in) {
  CandidateLists lists;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view view = Trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto tab = view.find('\t');
    if (tab == std::string_view::npos)
      Malformed(line_number, "expected qid<TAB>idx,idx,...");
    std::vector<std::size_t> indices;
    std::string_view rest = Trim(view.substr(tab + 1));
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = Trim(rest.substr(0, comma));
      std::size_t index = 0;
      if (!ParseNumber(item, index))
        Malformed(line_number, "bad document index '" + std::string(item) + "'");
      indices.push_back(index);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    lists[std::string(Trim(view.substr(0, tab)))] = std::move(indices);
  }
  return lists;
}

CandidateLists LoadCandidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return ParseCandidates(in);
}

QuerySet RestrictTopK(const QuerySet& qs, const CandidateLists& candidates,
                      std::size_t k) {
  if (k == 0) throw InvalidArgument("restrict_topk: k must be positive");
  QuerySet out;
  out.feature_count = qs.feature_count;
  out.queries.reserve(qs.queries.size());
  for (const auto& q : qs.queries) {
    const auto it = candidates.find(q.qid);
    if (it == candidates.end()) {
      out.queries.push_back(q);
      continue;
    }
    Query kept{q.qid, {}};
    const auto& list = it->second;
    for (const auto index : list)
      if (index >= q.documents.size())
        throw DataError("query " + q.qid + ": candidate index " +
                        std::to_string(index) + " out of range (" +
                        std::to_string(q.documents.size()) + " documents)");
    for (std::size_t r = 0; r < list.size() && r < k; ++r)
      kept.documents.push_back(q.documents[list[r]]);
    // An empty candidate list would leave an empty query; keep it whole.
    if (kept.documents.empty()) kept.documents = q.documents;
    out.queries.push_back(std::move(kept));
  }
  return out;
}

QuerySet SelectFeatures(const QuerySet& qs,
                        const std::vector<std::size_t>& features) {
  if (features.empty()) throw InvalidArgument("empty feature subset");
  for (const auto f : features)
    if (f >= qs.feature_count)
      throw InvalidArgument("feature id " + std::to_string(f + 1) +
                            " exceeds feature count " +
                            std::to_string(qs.feature_count));
  QuerySet out;
  out.feature_count = features.size();
  out.queries.reserve(qs.queries.size());
  for (const auto& q : qs.queries) {
    Query projected{q.qid, {}};
    projected.documents.reserve(q.documents.size());
    for (const auto& doc : q.documents) {
      Document d{{}, doc.label, doc.doc_id};
      d.features.reserve(features.size());
      for (const auto f : features) d.features.push_back(doc.features[f]);
      projected.documents.push_back(std::move(d));
    }
    out.queries.push_back(std::move(projected));
  }
  return out;
}

namespace {

// Latent relevance thresholds for grades 1..4.
constexpr double kGradeThresholds[] = {0.5, 1.3, 2.0, 2.5};
constexpr double kLabelNoise = 0.15;

double Gaussian(Rng& rng) {
  // Box-Muller on the portable uniform stream.
  const double u1 = 1.0 - UniformUnit(rng);
  const double u2 = UniformUnit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Strictly increasing, different curvature per duplicate slot.
double DuplicateOf(double parent, std::size_t slot) {
  return static_cast<double>(slot + 2) * parent + static_cast<double>(slot + 1);
}

}  // namespace

SyntheticDataset GenerateSynthetic(const SyntheticSpec& spec) {
  if (spec.n_queries == 0 || spec.docs_per_query == 0 || spec.informative == 0 ||
      spec.duplicates_per_informative == 0)
    throw InvalidArgument("generate_synthetic: counts must be positive");
  const std::size_t n_inf = spec.informative;
  const std::size_t n_dup = spec.duplicates_per_informative;
  const std::size_t d = n_inf * (1 + n_dup) + spec.noise;

  SyntheticDataset out;
  out.truth.resize(d);
  for (std::size_t i = 0; i < n_inf; ++i) {
    out.truth[i] = {FeatureRole::kInformative, static_cast<int>(i)};
    for (std::size_t m = 0; m < n_dup; ++m)
      out.truth[n_inf + i * n_dup + m] = {FeatureRole::kDuplicate,
                                          static_cast<int>(i)};
  }

  out.data.feature_count = d;
  Rng rng = MakeRng(spec.seed, {0x5e7});
  for (std::size_t qi = 0; qi < spec.n_queries; ++qi) {
    Query q{std::to_string(qi + 1), {}};
    for (std::size_t r = 0; r < spec.docs_per_query; ++r) {
      Document doc;
      doc.features.assign(d, 0.0);
      double latent = 0.0;
      for (std::size_t i = 0; i < n_inf; ++i) {
        const double x = Gaussian(rng);
        doc.features[i] = x;
        latent += std::tanh(1.5 * x);
        for (std::size_t m = 0; m < n_dup; ++m)
          doc.features[n_inf + i * n_dup + m] = DuplicateOf(x, m);
      }
      latent += kLabelNoise * (2.0 * UniformUnit(rng) - 1.0);
      for (std::size_t j = n_inf * (1 + n_dup); j < d; ++j)
        doc.features[j] = Gaussian(rng);
      for (const double threshold : kGradeThresholds)
        if (latent > threshold) ++doc.label;
      q.documents.push_back(std::move(doc));
    }
    out.data.queries.push_back(std::move(q));
  }
  return out;
}

void WriteTruth(const std::vector<FeatureTruth>& truth, std::ostream& out) {
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const char* role = truth[j].role == FeatureRole::kInformative ? "informative"
                       : truth[j].role == FeatureRole::kDuplicate ? "duplicate"
                                                                  : "noise";
    out << (j + 1) << '\t' << role << '\t' << (truth[j].family + 1) << '\n';
  }
}

}  // namespace nfs

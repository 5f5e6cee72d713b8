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

#include "commands.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nfs/baselines.h"
#include "nfs/data.h"
#include "nfs/errors.h"
#include "nfs/groupmine.h"
#include "nfs/metrics.h"
#include "nfs/parallel.h"
#include "nfs/random.h"
#include "nfs/saliency.h"
#include "nfs/select.h"
#include "nfs/trainer.h"
#include "spdlog/fmt/fmt.h"
#include "spdlog/spdlog.h"

namespace nfs::cli {
namespace {

using json = nlohmann::json;

constexpr std::uint64_t kRandomSubsetStream = 0x7a;

struct DataFlags {
  std::string train;
  std::string valid;
  std::string test;
  std::string candidates;
  std::size_t top_k = 128;
};

struct KeepFlags {
  std::size_t keep = 0;
  double keep_percent = 0.0;
};

struct Options {
  int threads = 0;
  std::string log_level = "info";
  std::uint64_t seed = 0;
  DataFlags data;
  KeepFlags keep;
  RerankerConfig reranker;
  TrainConfig train;
  NullModelConfig null_model;
  BaselineConfig baseline;
  SyntheticSpec synth;
  std::string model;
  std::string resume;
  std::string groups;
  std::string out;
  std::string report;
  std::string log;
  std::string dump;
  std::string verdicts;
  std::string truth;
  std::string importances;
  std::string metric = "ndcg";
  bool literal = false;
  std::size_t k = 3;
  std::vector<std::string> features;
  std::vector<std::string> scores;
  std::vector<double> random_percent;
};

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::ifstream OpenIn(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

// Resolved configuration of the active subcommand, `key=value` per entry.
std::vector<std::string> ConfigLines(const CLI::App& sub) {
  std::vector<std::string> lines;
  std::istringstream text(sub.config_to_str(true, false));
  std::string line;
  while (std::getline(text, line)) {
    if (line.empty() || line.front() == '[' || line.front() == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

void WriteConfigHeader(const CLI::App& sub, std::ostream& out) {
  out << "# command=" << sub.get_name() << '\n';
  for (const auto& line : ConfigLines(sub)) out << "# " << line << '\n';
}

json ConfigJson(const CLI::App& sub) {
  json config = json::object();
  config["command"] = sub.get_name();
  for (const auto& line : ConfigLines(sub)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(' ');
      const auto e = s.find_last_not_of(' ');
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    config[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return config;
}

QuerySet LoadData(const std::string& path, const DataFlags& flags) {
  QuerySet qs = LoadLetor(path);
  if (!flags.candidates.empty())
    qs = RestrictTopK(qs, LoadCandidates(flags.candidates), flags.top_k);
  return qs;
}

QuerySet LoadValid(const DataFlags& flags, std::size_t feature_count) {
  if (flags.valid.empty()) return QuerySet{{}, feature_count};
  return LoadData(flags.valid, flags);
}

std::size_t ResolveKeep(const KeepFlags& flags, std::size_t d) {
  if (flags.keep > 0 && flags.keep_percent > 0.0)
    throw InvalidArgument("--keep and --keep-percent are mutually exclusive");
  if (flags.keep > 0) {
    if (flags.keep > d)
      throw InvalidArgument("--keep " + std::to_string(flags.keep) + " exceeds " +
                            std::to_string(d) + " features");
    return flags.keep;
  }
  if (flags.keep_percent > 0.0) return KeepCount(flags.keep_percent, d);
  throw InvalidArgument("one of --keep or --keep-percent is required");
}

void WriteSelection(const CLI::App& sub, const Options& o, const SelectionResult& result) {
  auto out = OpenOut(o.out);
  WriteFeatureList(result.kept, out);
  const std::string report = o.report.empty() ? o.out + ".report" : o.report;
  auto side = OpenOut(report);
  WriteConfigHeader(sub, side);
  WriteSelectionReport(result, side);
  spdlog::info("kept {} features -> {}", result.kept.size(), o.out);
}

// A group file written by `saliency` or `mine`; the header carries the map
// count and feature count.
FeatureGroupSet ReadGroupFile(const std::string& path) {
  auto in = OpenIn(path);
  std::size_t maps = 0, features = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# maps_total=", 0) == 0) maps = std::stoul(line.substr(13));
    if (line.rfind("# feature_count=", 0) == 0) features = std::stoul(line.substr(16));
  }
  if (features == 0) throw DataError(path + ": missing '# feature_count=' header");
  auto again = OpenIn(path);
  return ReadGroupReport(again, features, maps);
}

void WriteGroupHeader(const CLI::App& sub, const FeatureGroupSet& set, std::ostream& out) {
  WriteConfigHeader(sub, out);
  out << "# maps_total=" << set.maps_total << '\n';
  out << "# feature_count=" << set.feature_count << '\n';
  out << "# members\tcount\texceedances\n";
}

std::vector<GroupVerdict> AsVerdicts(const FeatureGroupSet& set) {
  std::vector<GroupVerdict> verdicts;
  for (const auto& [group, count] : set.groups) verdicts.push_back({group, count, 0, true});
  return verdicts;
}

// ---- subcommands -----------------------------------------------------------

void CmdTrain(const CLI::App& sub, Options& o) {
  const QuerySet train = LoadData(o.data.train, o.data);
  const QuerySet valid = LoadValid(o.data, train.feature_count);
  o.train.seed = o.seed;
  std::unique_ptr<Trainer> trainer;
  if (!o.resume.empty()) {
    TrainingCheckpoint state = LoadCheckpoint(o.resume);
    if (sub.count("--epochs") > 0) state.train.epochs = o.train.epochs;
    trainer = std::make_unique<Trainer>(train, valid, std::move(state));
  } else {
    o.reranker.n_heads = AdaptHeadCount(
        o.reranker.feature_embedding > 0 ? o.reranker.feature_embedding : train.feature_count,
        o.reranker.n_heads);
    trainer = std::make_unique<Trainer>(train, valid, o.reranker, o.train);
  }
  std::ofstream log;
  if (!o.log.empty()) {
    log = OpenOut(o.log);
    log << json{{"record", "config"}, {"config", ConfigJson(sub)}}.dump() << '\n';
  }
  while (!trainer->Done()) {
    const EpochRecord r = trainer->RunEpoch();
    spdlog::info("epoch {} loss {:.6f} valid ndcg@3 {:.4f}", r.epoch, r.mean_loss,
                 r.valid_ndcg3);
    if (log.is_open())
      log << json{{"record", "epoch"}, {"epoch", r.epoch}, {"loss", r.mean_loss},
                  {"valid_ndcg3", r.valid_ndcg3}}.dump()
          << '\n';
    SaveCheckpoint(trainer->checkpoint(), o.out);
  }
  SaveCheckpoint(trainer->checkpoint(), o.out);
}

void CmdSaliency(const CLI::App& sub, Options& o) {
  const TrainedModel model = LoadCheckpoint(o.model).model;
  const QuerySet data = LoadData(o.data.train, o.data);
  const auto maps = ComputeAllMaps(model, data);
  if (!o.dump.empty()) {
    auto dump = OpenOut(o.dump);
    WriteSaliencyDump(data, maps, dump);
  }
  const FeatureGroupSet groups =
      AggregateGroups(maps, data.feature_count, o.null_model.threshold);
  auto out = OpenOut(o.out);
  WriteGroupHeader(sub, groups, out);
  WriteGroupReport(AsVerdicts(groups), out, false);
  spdlog::info("{} distinct groups from {} maps", groups.groups.size(), groups.maps_total);
}

void CmdMine(const CLI::App& sub, Options& o) {
  o.null_model.seed = o.seed;
  FeatureGroupSet mined;
  if (!o.groups.empty()) {
    mined = ReadGroupFile(o.groups);
    if (mined.maps_total == 0) throw DataError(o.groups + ": missing '# maps_total=' header");
  } else {
    if (o.model.empty() || o.data.train.empty())
      throw InvalidArgument("mine needs --groups, or --model with --data");
    const TrainedModel model = LoadCheckpoint(o.model).model;
    mined = MineGroups(model, LoadData(o.data.train, o.data), o.null_model.threshold);
  }
  const PruneResult pruned = Prune(
      mined, o.null_model, o.literal ? NullSampling::kLiteral : NullSampling::kBinomial);
  auto out = OpenOut(o.out);
  WriteGroupHeader(sub, pruned.survivors, out);
  WriteGroupReport(pruned.verdicts, out, true);
  if (!o.verdicts.empty()) {
    auto all = OpenOut(o.verdicts);
    WriteGroupHeader(sub, mined, all);
    WriteGroupReport(pruned.verdicts, all, false);
  }
  spdlog::info("{} of {} groups survive", pruned.survivors.groups.size(), mined.groups.size());
}

void CmdSelectNfs(const CLI::App& sub, Options& o) {
  const QuerySet train = LoadData(o.data.train, o.data);
  const std::size_t n_keep = ResolveKeep(o.keep, train.feature_count);
  o.train.seed = o.seed;
  o.null_model.seed = o.seed;
  SelectionResult result;
  if (!o.groups.empty()) {
    FeatureGroupSet survivors = ReadGroupFile(o.groups);
    if (survivors.feature_count != train.feature_count)
      throw DataError(o.groups + ": feature count differs from --train");
    result = SelectFromGroups(survivors, n_keep);
  } else if (!o.model.empty()) {
    const TrainedModel model = LoadCheckpoint(o.model).model;
    const auto mined = MineGroups(model, train, o.null_model.threshold);
    result = SelectFromGroups(Prune(mined, o.null_model).survivors, n_keep);
  } else {
    o.reranker.n_heads = AdaptHeadCount(
        o.reranker.feature_embedding > 0 ? o.reranker.feature_embedding : train.feature_count,
        o.reranker.n_heads);
    NfsConfig config{o.reranker, o.train, o.null_model, n_keep};
    result = NfsSelect(train, LoadValid(o.data, train.feature_count), config).selection;
  }
  WriteSelection(sub, o, result);
}

void CmdSelectGas(const CLI::App& sub, Options& o) {
  const QuerySet train = LoadData(o.data.train, o.data);
  o.baseline.seed = o.seed;
  o.baseline.metric = o.metric == "map" ? ImportanceMetric::kMap : ImportanceMetric::kNdcg;
  WriteSelection(sub, o, GasSelect(train, ResolveKeep(o.keep, train.feature_count), o.baseline));
}

void CmdSelectHcas(const CLI::App& sub, Options& o) {
  const QuerySet train = LoadData(o.data.train, o.data);
  o.baseline.seed = o.seed;
  WriteSelection(sub, o,
                 HcasSelect(train, ResolveKeep(o.keep, train.feature_count), o.baseline));
}

void CmdSelectXgas(const CLI::App& sub, Options& o) {
  const QuerySet train = LoadData(o.data.train, o.data);
  o.baseline.seed = o.seed;
  const auto importance = LoadImportances(o.importances, train.feature_count);
  WriteSelection(sub, o,
                 XgasSelect(train, importance, ResolveKeep(o.keep, train.feature_count),
                            o.baseline));
}

struct EvalRow {
  std::string method;
  std::vector<std::size_t> features;  // empty for external scores
  std::size_t heads = 0;
  double ndcg = 0.0;
  bool external = false;
};

std::pair<std::string, std::string> SplitNamed(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq != std::string::npos) return {spec.substr(0, eq), spec.substr(eq + 1)};
  return {std::filesystem::path(spec).stem().string(), spec};
}

std::vector<std::vector<double>> ReadScores(const std::string& path, const QuerySet& test) {
  auto in = OpenIn(path);
  std::vector<std::vector<double>> scores(test.queries.size());
  std::string line;
  std::size_t q = 0, line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line.front() == '#') continue;
    while (q < test.queries.size() && scores[q].size() == test.queries[q].documents.size()) ++q;
    if (q == test.queries.size()) throw DataError(path + ": more scores than test documents");
    try {
      scores[q].push_back(std::stod(line));
    } catch (const std::exception&) {
      throw DataError(path + " line " + std::to_string(line_number) + ": not a number");
    }
  }
  if (test.queries.empty() || scores.back().size() != test.queries.back().documents.size())
    throw DataError(path + ": fewer scores than test documents");
  return scores;
}

void CmdEval(const CLI::App& sub, Options& o) {
  const QuerySet train = LoadData(o.data.train, o.data);
  const QuerySet valid = LoadValid(o.data, train.feature_count);
  const QuerySet test = LoadData(o.data.test, o.data);
  const std::size_t d = train.feature_count;
  if (test.feature_count != d) throw DataError("test and train feature counts differ");
  o.train.seed = o.seed;

  std::vector<std::pair<std::string, std::vector<std::size_t>>> subsets;
  std::vector<std::size_t> all(d);
  std::iota(all.begin(), all.end(), std::size_t{0});
  subsets.emplace_back("all", all);
  for (const auto& spec : o.features) {
    auto [name, path] = SplitNamed(spec);
    auto in = OpenIn(path);
    auto list = ReadFeatureList(in);
    if (list.back() >= d) throw DataError(path + ": feature id exceeds " + std::to_string(d));
    subsets.emplace_back(name, std::move(list));
  }
  for (std::size_t i = 0; i < o.random_percent.size(); ++i) {
    const std::size_t n = KeepCount(o.random_percent[i], d);
    std::vector<std::size_t> pool = all;
    Rng rng = MakeRng(o.seed, {kRandomSubsetStream, i});
    for (std::size_t j = 0; j < n; ++j)
      std::swap(pool[j], pool[j + static_cast<std::size_t>(rng() % (d - j))]);
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    subsets.emplace_back("random", std::move(pool));
  }

  std::vector<EvalRow> rows;
  for (const auto& [name, features] : subsets) {
    RerankerConfig config = o.reranker;
    const std::size_t width =
        config.feature_embedding > 0 ? config.feature_embedding : features.size();
    config.n_heads = HeadsForSubset(width, o.reranker.n_heads, features.size(), d);
    const bool whole = features.size() == d && std::is_sorted(features.begin(), features.end());
    const QuerySet sub_train = whole ? train : SelectFeatures(train, features);
    const QuerySet sub_valid = whole ? valid : SelectFeatures(valid, features);
    const QuerySet sub_test = whole ? test : SelectFeatures(test, features);
    spdlog::info("eval {}: {} features, {} heads", name, features.size(), config.n_heads);
    const TrainResult trained = Train(sub_train, sub_valid, config, o.train);
    const double ndcg = MeanNdcgAtK(sub_test, trained.model.ScoreAll(sub_test), o.k);
    rows.push_back({name, features, config.n_heads, ndcg, false});
  }
  for (const auto& spec : o.scores) {
    auto [name, path] = SplitNamed(spec);
    rows.push_back({name, {}, 0, MeanNdcgAtK(test, ReadScores(path, test), o.k), true});
  }

  auto out = OpenOut(o.out);
  out << json{{"record", "config"}, {"config", ConfigJson(sub)}}.dump() << '\n';
  for (const auto& row : rows) {
    json features = json::array();
    for (const auto f : row.features) features.push_back(f + 1);
    json record{{"record", "result"},
                {"method", row.method},
                {"k", o.k},
                {"ndcg", row.ndcg},
                {"external", row.external}};
    if (!row.external) {
      record["n_features"] = row.features.size();
      record["percent"] = 100.0 * static_cast<double>(row.features.size()) /
                          static_cast<double>(d);
      record["heads"] = row.heads;
      record["features"] = features;
    }
    out << record.dump() << '\n';
  }
  const std::string table_path = o.report.empty() ? o.out + ".txt" : o.report;
  auto table = OpenOut(table_path);
  WriteConfigHeader(sub, table);
  table << fmt::format("{:<12} {:>8} {:>6} {:>6} {:>10}  {}\n", "method", "percent", "n",
                       "heads", fmt::format("nDCG@{}", o.k), "features");
  for (const auto& row : rows) {
    if (row.external) {
      table << fmt::format("{:<12} {:>8} {:>6} {:>6} {:>10.4f}  {}\n", row.method, "-", "-",
                           "-", row.ndcg, "external");
      continue;
    }
    std::string ids;
    for (const auto f : row.features) ids += (ids.empty() ? "" : ",") + std::to_string(f + 1);
    table << fmt::format("{:<12} {:>7.1f}% {:>6} {:>6} {:>10.4f}  {}\n", row.method,
                         100.0 * static_cast<double>(row.features.size()) /
                             static_cast<double>(d),
                         row.features.size(), row.heads, row.ndcg, ids);
  }
}

void CmdSynth(const CLI::App&, Options& o) {
  o.synth.seed = o.seed;
  const SyntheticDataset ds = GenerateSynthetic(o.synth);
  SaveLetor(ds.data, o.out);
  if (!o.truth.empty()) {
    auto truth = OpenOut(o.truth);
    WriteTruth(ds.truth, truth);
  }
}

// ---- option registration ---------------------------------------------------

void AddModelOptions(CLI::App* sub, Options& o) {
  sub->add_option("--layers", o.reranker.n_attention_layers, "Self-attention layers")
      ->capture_default_str();
  sub->add_option("--heads", o.reranker.n_heads, "Attention heads (adapted to the width)")
      ->capture_default_str();
  sub->add_option("--embedding", o.reranker.feature_embedding,
                  "Feature embedding size, 0 disables it")
      ->capture_default_str();
  sub->add_option("--hidden", o.reranker.hidden_size, "Hidden layer size")
      ->capture_default_str();
  sub->add_option("--dropout", o.reranker.dropout_p, "Dropout probability")
      ->capture_default_str();
  sub->add_option("--bn-momentum", o.reranker.bn_momentum, "Batch norm momentum")
      ->capture_default_str();
  sub->add_option("--temperature", o.reranker.temperature, "ApproxNDCG temperature")
      ->capture_default_str();
  sub->add_option("--epochs", o.train.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--batch-size", o.train.batch_size, "Queries per batch")
      ->capture_default_str();
  sub->add_option("--lr", o.train.learning_rate, "Adam learning rate")->capture_default_str();
}

void AddNullOptions(CLI::App* sub, Options& o) {
  sub->add_option("--threshold", o.null_model.threshold, "Saliency threshold t")
      ->capture_default_str();
  sub->add_option("--datasets", o.null_model.datasets, "Random datasets K")
      ->capture_default_str();
  sub->add_option("--alpha", o.null_model.alpha, "Allowed exceedance fraction")
      ->capture_default_str();
}

void AddCandidateOptions(CLI::App* sub, Options& o) {
  sub->add_option("--candidates", o.data.candidates,
                  "First-stage candidate lists (qid<TAB>idx,...)");
  sub->add_option("--top-k", o.data.top_k, "Candidates kept per query")
      ->capture_default_str();
}

void AddKeepOptions(CLI::App* sub, Options& o) {
  sub->add_option("--keep", o.keep.keep, "Number of features to keep");
  sub->add_option("--keep-percent", o.keep.keep_percent,
                  "Percentage of features to keep (floor)");
  sub->add_option("--out", o.out, "Selected-features file")->required();
  sub->add_option("--report", o.report, "Sidecar report (default <out>.report)");
}

void AddBaselineOptions(CLI::App* sub, Options& o, bool with_c) {
  sub->add_option("--k", o.baseline.k, "Cutoff of the single-feature nDCG")
      ->capture_default_str();
  if (with_c)
    sub->add_option("--c", o.baseline.c, "Redundancy tradeoff")->capture_default_str();
  sub->add_option("--max-docs", o.baseline.max_pooled_docs,
                  "Pooled documents used for correlations")
      ->capture_default_str();
}

using Handler = std::function<void(const CLI::App&, Options&)>;

int Classify(const std::exception& e, const std::string& command, std::ostream& err) {
  int code = kExitUsage;
  const char* kind = "usage error";
  if (dynamic_cast<const NumericalError*>(&e) != nullptr) {
    code = kExitNumerical;
    kind = "numerical failure";
  } else if (dynamic_cast<const DataError*>(&e) != nullptr ||
             dynamic_cast<const std::ios_base::failure*>(&e) != nullptr) {
    code = kExitData;
    kind = "data error";
  } else if (dynamic_cast<const std::invalid_argument*>(&e) == nullptr) {
    code = kExitData;
    kind = "error";
  }
  err << "nfs " << command << ": " << kind << ": " << e.what() << '\n';
  return code;
}

}  // namespace

std::size_t KeepCount(double percent, std::size_t feature_count) {
  if (!(percent > 0.0) || percent > 100.0)
    throw InvalidArgument("keep percentage must lie in (0, 100]");
  const auto n = static_cast<std::size_t>(
      std::floor(percent * static_cast<double>(feature_count) / 100.0 + 1e-9));
  if (n == 0)
    throw InvalidArgument(fmt::format("{}% of {} features keeps none", percent, feature_count));
  return std::min(n, feature_count);
}

std::size_t HeadsForSubset(std::size_t width, std::size_t requested, std::size_t subset,
                           std::size_t feature_count) {
  static constexpr std::pair<double, std::size_t> kFixed[] = {
      {5.0, 1}, {10.0, 1}, {30.0, 4}, {40.0, 3}};
  for (const auto& [percent, heads] : kFixed) {
    const auto n = static_cast<std::size_t>(
        std::floor(percent * static_cast<double>(feature_count) / 100.0 + 1e-9));
    if (subset < feature_count && n == subset && width % heads == 0) return heads;
  }
  return AdaptHeadCount(width, requested);
}

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Neural feature selection for learning to rank"};
  app.set_config("--config", "", "INI/TOML configuration; flags override it");
  app.require_subcommand(1);
  app.add_option("--threads", o.threads, "Worker threads (0 = all)");
  app.add_option("--log-level", o.log_level, "trace|debug|info|warn|error|off")
      ->capture_default_str();

  std::map<CLI::App*, Handler> handlers;

  auto* train = app.add_subcommand("train", "Train the reranker and write a checkpoint");
  train->add_option("--train", o.data.train, "Training data (LETOR)")->required();
  train->add_option("--valid", o.data.valid, "Validation data");
  train->add_option("--out", o.out, "Checkpoint path")->required();
  train->add_option("--log", o.log, "Per-epoch JSONL log");
  train->add_option("--resume", o.resume, "Resume from a checkpoint");
  train->add_option("--seed", o.seed, "Seed")->capture_default_str();
  AddModelOptions(train, o);
  AddCandidateOptions(train, o);
  handlers[train] = CmdTrain;

  auto* saliency = app.add_subcommand("saliency", "Extract salient feature groups");
  saliency->add_option("--model", o.model, "Checkpoint")->required();
  saliency->add_option("--data", o.data.train, "Data to explain")->required();
  saliency->add_option("--out", o.out, "Group report")->required();
  saliency->add_option("--dump", o.dump, "Per-document saliency maps");
  saliency->add_option("--threshold", o.null_model.threshold, "Saliency threshold t")
      ->capture_default_str();
  AddCandidateOptions(saliency, o);
  handlers[saliency] = CmdSaliency;

  auto* mine = app.add_subcommand("mine", "Prune feature groups against the null model");
  mine->add_option("--model", o.model, "Checkpoint");
  mine->add_option("--data", o.data.train, "Data to explain");
  mine->add_option("--groups", o.groups, "Group report from 'saliency'");
  mine->add_option("--out", o.out, "Surviving groups")->required();
  mine->add_option("--verdicts", o.verdicts, "Every group with its exceedances");
  mine->add_flag("--literal", o.literal, "Simulate every random map (slow)");
  mine->add_option("--seed", o.seed, "Seed")->capture_default_str();
  AddNullOptions(mine, o);
  AddCandidateOptions(mine, o);
  handlers[mine] = CmdMine;

  auto* nfs = app.add_subcommand("select-nfs", "Neural feature selection");
  nfs->add_option("--train", o.data.train, "Training data")->required();
  nfs->add_option("--valid", o.data.valid, "Validation data");
  nfs->add_option("--model", o.model, "Use this checkpoint instead of training");
  nfs->add_option("--groups", o.groups, "Use these surviving groups instead of mining");
  nfs->add_option("--seed", o.seed, "Seed")->capture_default_str();
  AddKeepOptions(nfs, o);
  AddModelOptions(nfs, o);
  AddNullOptions(nfs, o);
  AddCandidateOptions(nfs, o);
  handlers[nfs] = CmdSelectNfs;

  auto* gas = app.add_subcommand("select-gas", "Greedy selection on Kendall tau");
  gas->add_option("--train", o.data.train, "Training data")->required();
  gas->add_option("--metric", o.metric, "Importance metric")
      ->check(CLI::IsMember({"ndcg", "map"}))
      ->capture_default_str();
  gas->add_option("--seed", o.seed, "Subsample seed")->capture_default_str();
  AddKeepOptions(gas, o);
  AddBaselineOptions(gas, o, true);
  AddCandidateOptions(gas, o);
  handlers[gas] = CmdSelectGas;

  auto* hcas = app.add_subcommand("select-hcas", "Spearman single-linkage selection");
  hcas->add_option("--train", o.data.train, "Training data")->required();
  hcas->add_option("--seed", o.seed, "Subsample seed")->capture_default_str();
  AddKeepOptions(hcas, o);
  AddBaselineOptions(hcas, o, false);
  AddCandidateOptions(hcas, o);
  handlers[hcas] = CmdSelectHcas;

  auto* xgas = app.add_subcommand("select-xgas", "Greedy selection on external importances");
  xgas->add_option("--train", o.data.train, "Training data")->required();
  xgas->add_option("--importances", o.importances, "fid<TAB>value file")->required();
  xgas->add_option("--seed", o.seed, "Subsample seed")->capture_default_str();
  AddKeepOptions(xgas, o);
  AddBaselineOptions(xgas, o, true);
  AddCandidateOptions(xgas, o);
  handlers[xgas] = CmdSelectXgas;

  auto* eval = app.add_subcommand("eval", "Retrain on feature subsets and report nDCG@k");
  eval->add_option("--train", o.data.train, "Training data")->required();
  eval->add_option("--valid", o.data.valid, "Validation data");
  eval->add_option("--test", o.data.test, "Test data")->required();
  eval->add_option("--features", o.features, "[method=]features file, repeatable");
  eval->add_option("--random-percent", o.random_percent,
                   "Random subsets of this percentage, repeatable");
  eval->add_option("--scores", o.scores, "name=score file of an external ranker, repeatable");
  eval->add_option("--k", o.k, "nDCG cutoff")->capture_default_str();
  eval->add_option("--out", o.out, "JSONL report")->required();
  eval->add_option("--report", o.report, "Text table (default <out>.txt)");
  eval->add_option("--seed", o.seed, "Seed")->capture_default_str();
  AddModelOptions(eval, o);
  AddCandidateOptions(eval, o);
  handlers[eval] = CmdEval;

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with ground truth");
  synth->add_option("--out", o.out, "LETOR output")->required();
  synth->add_option("--truth", o.truth, "Ground truth (fid, role, family)");
  synth->add_option("--seed", o.seed, "Seed")->capture_default_str();
  synth->add_option("--queries", o.synth.n_queries, "Queries")->capture_default_str();
  synth->add_option("--docs", o.synth.docs_per_query, "Documents per query")
      ->capture_default_str();
  synth->add_option("--informative", o.synth.informative, "Informative features")
      ->capture_default_str();
  synth->add_option("--duplicates", o.synth.duplicates_per_informative,
                    "Duplicates per informative feature")
      ->capture_default_str();
  synth->add_option("--noise", o.synth.noise, "Noise features")->capture_default_str();
  handlers[synth] = CmdSynth;

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  spdlog::set_level(spdlog::level::from_str(o.log_level));
  if (o.threads < 0) {
    err << "nfs: usage error: --threads must be >= 0\n";
    return kExitUsage;
  }
  if (o.threads > 0) SetNumThreads(o.threads);
  try {
    handlers.at(active)(*active, o);
  } catch (const std::exception& e) {
    return Classify(e, active->get_name(), err);
  }
  return kExitOk;
}

}  // namespace nfs::cli

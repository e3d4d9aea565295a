// Copyright 2026 The kgadv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgadv/advtrain.h"
#include "kgadv/checkpoint.h"
#include "kgadv/common.h"
#include "kgadv/evalkit.h"
#include "kgadv/kgdata.h"
#include "kgadv/scorers.h"

#ifndef KGADV_VERSION
#define KGADV_VERSION "0.0.0"
#endif

namespace kgadv::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr char kVersion[] = "kgadv " KGADV_VERSION;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string env_name(std::string_view flag) {
  std::string s = "KGADV_";
  for (char c : flag) {
    s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return s;
}

template <typename T>
CLI::Option* add(CLI::App* app, const std::string& flag, T& value, const std::string& help) {
  return app->add_option("--" + flag, value, help)
      ->envname(env_name(flag))
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string percent1(double fraction) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << fraction * 100.0 << '%';
  return os.str();
}

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f << text;
  f.close();
  if (!f) throw DataError("write failed: " + path.string());
}

// Write then rename so readers never see a half-written file.
void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_text(tmp, text);
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// --- datasets -------------------------------------------------------------------

enum class Task { kLinkPrediction, kClassification };

Task parse_task(const std::string& s) {
  if (s == "lp") return Task::kLinkPrediction;
  if (s == "tc") return Task::kClassification;
  throw UsageError("unknown task '" + s + "' (expected lp or tc)");
}

std::string_view to_string(Task t) {
  return t == Task::kLinkPrediction ? "lp" : "tc";
}

struct DataFlags {
  std::string dir;
  std::string train;
  std::string valid;
  std::string test;
  std::string task = "lp";
};

void add_data_flags(CLI::App* app, DataFlags& f, bool with_task) {
  add(app, "data", f.dir, "Dataset directory holding train.txt, valid.txt, test.txt");
  add(app, "train", f.train, "Training triples (overrides --data)");
  add(app, "valid", f.valid, "Validation triples (overrides --data)");
  add(app, "test", f.test, "Test triples (overrides --data)");
  if (with_task) add(app, "task", f.task, "Validation task: lp or tc")->capture_default_str();
}

struct DataPaths {
  fs::path train;
  fs::path valid;
  fs::path test;
};

DataPaths resolve_paths(const DataFlags& f) {
  auto pick = [&](const std::string& explicit_path, const char* file) -> fs::path {
    if (!explicit_path.empty()) return explicit_path;
    if (!f.dir.empty()) return fs::path(f.dir) / file;
    throw UsageError("no dataset given: pass --data DIR or --train/--valid/--test");
  };
  DataPaths p{pick(f.train, "train.txt"), pick(f.valid, "valid.txt"),
              pick(f.test, "test.txt")};
  for (const fs::path* q : {&p.train, &p.valid, &p.test}) {
    if (!fs::is_regular_file(*q)) throw DataError("dataset file not found: " + q->string());
  }
  return p;
}

struct Dataset {
  Task task = Task::kLinkPrediction;
  DataPaths paths;
  KnowledgeGraph kg;
  LabeledSet valid_labeled;  // classification only
  LabeledSet test_labeled;
};

// Heap-allocated: trainers keep a reference to the graph.
std::unique_ptr<Dataset> load_dataset(const DataPaths& paths, Task task) {
  auto d = std::make_unique<Dataset>();
  d->task = task;
  d->paths = paths;
  const auto train = load_triples(paths.train);
  if (task == Task::kLinkPrediction) {
    const auto valid = load_triples(paths.valid);
    const auto test = load_triples(paths.test);
    d->kg = build_graph(train, valid, test);
  } else {
    const auto valid = load_labeled_triples(paths.valid);
    const auto test = load_labeled_triples(paths.test);
    ClassificationData cd = build_classification_data(train, valid, test);
    d->kg = std::move(cd.kg);
    d->valid_labeled = std::move(cd.valid);
    d->test_labeled = std::move(cd.test);
  }
  augment_reverse(d->kg);
  return d;
}

json dataset_json(const Dataset& d) {
  auto entry = [](const fs::path& p) {
    return json{{"path", p.string()}, {"digest", file_digest(p)}};
  };
  return json{{"task", std::string(to_string(d.task))},
              {"train", entry(d.paths.train)},
              {"valid", entry(d.paths.valid)},
              {"test", entry(d.paths.test)},
              {"vocab_digest", hex64(d.kg.vocab.digest())},
              {"entities", d.kg.vocab.num_entities()},
              {"relations", d.kg.vocab.num_relations()},
              {"duplicates_dropped", d.kg.duplicates_dropped}};
}

// Higher is better: Hits@10 on valid for lp, accuracy on labeled valid for tc.
std::function<double(const AdversarialTrainer&)> make_validator(const Dataset& d) {
  if (d.task == Task::kLinkPrediction) {
    return [&d](const AdversarialTrainer& t) {
      const auto r = evaluate_link_prediction(d.kg, d.kg.valid, t.store(), t.generator());
      if (r.records.empty()) return std::numeric_limits<double>::quiet_NaN();
      return aggregate_metrics(r.records).hits10;
    };
  }
  return [&d](const AdversarialTrainer& t) {
    const LabeledSet& v = d.valid_labeled;
    if (v.triples.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto scores = score_triples(v.triples, t.store(), t.discriminator());
    const ThresholdTable table =
        select_thresholds(scores, v.triples, v.labels, d.kg.vocab.num_relations());
    return classification_accuracy(scores, v.triples, v.labels, table);
  };
}

// --- configuration --------------------------------------------------------------

struct ModelFlags {
  TrainConfig cfg;
  std::string gn = "transe";
  std::string dn = "mlp";
  std::string sampling = "unif";
  std::string activation = "relu";
  int layers = 2;
  int hidden = 100;
  int filters = 100;
  int width = 3;

  TrainConfig build() const {
    TrainConfig c = cfg;
    c.gn = ScorerSpec{parse_family(gn), Role::kGenerator, layers, hidden, filters, width,
                      parse_activation(activation)};
    c.dn = c.gn;
    c.dn.family = parse_family(dn);
    c.dn.role = Role::kDiscriminator;
    c.sampling = parse_sampling_mode(sampling);
    c.validate();
    return c;
  }
};

void add_model_flags(CLI::App* app, ModelFlags& f) {
  TrainConfig& c = f.cfg;
  add(app, "gn", f.gn, "Generator family: transe, transh, transd, mlp, cnn")->capture_default_str();
  add(app, "dn", f.dn, "Discriminator family: transe, transh, transd, mlp, cnn")->capture_default_str();
  add(app, "k", c.k, "Embedding dimension")->capture_default_str();
  add(app, "gamma", c.gamma, "Margin")->capture_default_str();
  add(app, "eta", c.eta, "Learning rate")->capture_default_str();
  add(app, "batch", c.batch, "Batch size")->capture_default_str();
  add(app, "lambda", c.weight_decay, "Weight decay")->capture_default_str();
  add(app, "ncritic", c.n_critic, "Discriminator steps per generator step")->capture_default_str();
  add(app, "clip", c.clip, "Clip bound for discriminator and shared parameters")->capture_default_str();
  add(app, "layers", f.layers, "MLP affine layers")->capture_default_str();
  add(app, "hidden", f.hidden, "MLP hidden width")->capture_default_str();
  add(app, "filters", f.filters, "CNN filter count")->capture_default_str();
  add(app, "width", f.width, "CNN filter width")->capture_default_str();
  add(app, "activation", f.activation, "Neural activation: relu or tanh")->capture_default_str();
  add(app, "epochs", c.epochs, "Maximum epochs")->capture_default_str();
  add(app, "sampling", f.sampling, "Negative sampling: unif or bern")->capture_default_str();
  add(app, "seed", c.seed, "Seed for every random stream")->capture_default_str();
  add(app, "patience", c.patience, "Validation rounds without improvement before stopping (0 disables)")
      ->capture_default_str();
  add(app, "eval-every", c.eval_every, "Validate every N epochs")->capture_default_str();
  add(app, "checkpoint-every", c.checkpoint_every, "Extra checkpoint every N epochs (0: final only)")
      ->capture_default_str();
  app->add_flag("--grid-mode", c.grid_mode, "Reject values outside the published search grid")
      ->envname(env_name("grid-mode"));
}

json spec_json(const ScorerSpec& s) {
  return json{{"family", std::string(to_string(s.family))},
              {"layers", s.layers},
              {"hidden", s.hidden},
              {"filters", s.filters},
              {"width", s.width},
              {"activation", std::string(to_string(s.activation))}};
}

json config_json(const TrainConfig& c) {
  return json{{"k", c.k},
              {"gamma", c.gamma},
              {"eta", c.eta},
              {"batch", c.batch},
              {"lambda", c.weight_decay},
              {"ncritic", c.n_critic},
              {"clip", c.clip},
              {"epochs", c.epochs},
              {"sampling", std::string(to_string(c.sampling))},
              {"seed", c.seed},
              {"patience", c.patience},
              {"eval_every", c.eval_every},
              {"checkpoint_every", c.checkpoint_every},
              {"grid_mode", c.grid_mode},
              {"gn", spec_json(c.gn)},
              {"dn", spec_json(c.dn)}};
}

// --- checkpoints against datasets ---------------------------------------------------

std::optional<fs::path> find_manifest(const fs::path& checkpoint) {
  fs::path dir = checkpoint.parent_path();
  // Periodic checkpoints live one level below the run directory.
  for (int up = 0; up < 2; ++up) {
    const fs::path p = dir / kManifestFile;
    if (fs::is_regular_file(p)) return p;
    if (!dir.has_parent_path() || dir.parent_path() == dir) break;
    dir = dir.parent_path();
  }
  return std::nullopt;
}

void check_checkpoint(const Checkpoint& c, const Dataset& d) {
  const auto n = static_cast<std::uint32_t>(d.kg.vocab.num_entities());
  const auto m = static_cast<std::uint32_t>(d.kg.vocab.num_relations());
  if (c.n != n || c.m != m) {
    throw DataError("checkpoint was trained on n=" + std::to_string(c.n) +
                    " entities and m=" + std::to_string(c.m) +
                    " relations, but the dataset has n=" + std::to_string(n) +
                    " and m=" + std::to_string(m) + " (reverse relations included)");
  }
  const auto& e = c.params.at(kEntityTable);
  if (e.shape.size() != 2 || e.shape[1] != c.k) {
    throw DataError("checkpoint entity table does not match its header k=" +
                    std::to_string(c.k));
  }
}

void check_manifest(const fs::path& manifest, const Dataset& d) {
  const json j = read_json(manifest);
  if (!j.contains("dataset")) throw DataError(manifest.string() + ": no dataset section");
  const json& ds = j.at("dataset");
  const std::string vocab = hex64(d.kg.vocab.digest());
  if (ds.at("vocab_digest").get<std::string>() != vocab) {
    throw DataError("vocabulary digest " + vocab + " differs from " +
                    ds.at("vocab_digest").get<std::string>() + " recorded in " +
                    manifest.string());
  }
  const std::pair<const char*, const fs::path*> files[] = {
      {"train", &d.paths.train}, {"valid", &d.paths.valid}, {"test", &d.paths.test}};
  for (const auto& [key, path] : files) {
    const std::string now = file_digest(*path);
    const std::string then = ds.at(key).at("digest").get<std::string>();
    if (now != then) {
      throw DataError(std::string(key) + " file " + path->string() +
                      " changed since training (digest " + now + ", manifest " + then +
                      "); pass --skip-manifest-check to evaluate anyway");
    }
  }
}

struct EvalFlags {
  DataFlags data;
  std::string checkpoint;
  std::string manifest;
  bool skip_manifest_check = false;
};

void add_eval_flags(CLI::App* app, EvalFlags& f) {
  add_data_flags(app, f.data, false);
  add(app, "checkpoint", f.checkpoint, "Checkpoint to evaluate");
  add(app, "manifest", f.manifest, "Training manifest (default: next to the checkpoint)");
  app->add_flag("--skip-manifest-check", f.skip_manifest_check,
                "Evaluate even if dataset digests differ from the manifest");
}

struct Loaded {
  std::unique_ptr<Dataset> data;
  Checkpoint ckpt;
};

Loaded load_for_eval(const EvalFlags& f, Task task) {
  if (f.checkpoint.empty()) throw UsageError("--checkpoint is required");
  const DataPaths paths = resolve_paths(f.data);
  Loaded l;
  l.ckpt = load_checkpoint(f.checkpoint);
  l.data = load_dataset(paths, task);
  check_checkpoint(l.ckpt, *l.data);
  if (!f.skip_manifest_check) {
    std::optional<fs::path> m;
    if (!f.manifest.empty()) {
      m = fs::path(f.manifest);
    } else {
      m = find_manifest(f.checkpoint);
    }
    if (m) check_manifest(*m, *l.data);
  }
  return l;
}

// --- train ------------------------------------------------------------------------

struct TrainFlags {
  DataFlags data;
  ModelFlags model;
  std::string out;
};

int cmd_train(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = f.model.build();
  if (f.out.empty()) throw UsageError("--out is required");
  const Task task = parse_task(f.data.task);
  const DataPaths paths = resolve_paths(f.data);
  const std::string started = now_utc();
  // Nothing is written until the data has loaded cleanly.
  const auto data = load_dataset(paths, task);
  if (auto w = pairing_warning(cfg.gn, cfg.dn)) err << "warning: " << *w << '\n';

  const fs::path dir = f.out;
  fs::create_directories(dir);
  data->kg.vocab.export_entities(dir / kEntitiesFile);
  data->kg.vocab.export_relations(dir / kRelationsFile);
  std::ofstream metrics(dir / kMetricsFile, std::ios::binary | std::ios::trunc);
  if (!metrics) throw DataError("cannot open " + (dir / kMetricsFile).string());

  AdversarialTrainer trainer(data->kg, cfg);
  RunHooks hooks;
  hooks.validate = make_validator(*data);
  hooks.on_epoch = [&](const EpochReport& rep, double valid) {
    const std::string line = format_epoch_line(rep, valid);
    metrics << line << '\n';
    metrics.flush();
    out << line << std::endl;
    if (rep.exhausted_negatives > 0) {
      err << "epoch " << rep.epoch << ": " << rep.exhausted_negatives
          << " negatives hit the retry limit\n";
    }
  };
  if (cfg.checkpoint_every > 0) {
    fs::create_directories(dir / "checkpoints");
    hooks.on_checkpoint = [&](const AdversarialTrainer& t) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch-%06d.kgc", t.epoch());
      save_checkpoint(dir / "checkpoints" / name, t.to_checkpoint());
    };
  }
  const RunResult result = run_training(trainer, hooks);
  metrics.close();
  save_checkpoint(dir / kCheckpointFile, trainer.to_checkpoint());

  json manifest{{"version", kVersion},
                {"command", "train"},
                {"config", config_json(cfg)},
                {"seed", cfg.seed},
                {"dataset", dataset_json(*data)},
                {"started", started},
                {"finished", now_utc()},
                {"epochs_run", result.epochs.size()},
                {"stopped_early", result.stopped_early},
                {"checkpoint", kCheckpointFile},
                {"metrics", kMetricsFile}};
  if (result.best_epoch > 0) {
    manifest["best_epoch"] = result.best_epoch;
    manifest["best_valid"] = result.best_valid;
  }
  write_text_atomic(dir / kManifestFile, manifest.dump(2) + "\n");
  out << "checkpoint\t" << (dir / kCheckpointFile).string() << '\n';
  return kExitOk;
}

// --- eval-lp ----------------------------------------------------------------------

struct EvalLpFlags {
  EvalFlags eval;
  std::string split = "test";
  std::string report;
  bool diagnostics = false;
};

int cmd_eval_lp(const EvalLpFlags& f, std::ostream& out, std::ostream& err) {
  if (f.split != "test" && f.split != "valid") {
    throw UsageError("--split must be test or valid");
  }
  const Loaded l = load_for_eval(f.eval, Task::kLinkPrediction);
  const KnowledgeGraph& kg = l.data->kg;
  Scorer gn(checkpoint_scorer(l.ckpt, Role::kGenerator), static_cast<std::int32_t>(l.ckpt.k));
  gn.bind(l.ckpt.params);
  const auto& split = f.split == "test" ? kg.test : kg.valid;
  const LinkPredictionResult res = evaluate_link_prediction(kg, split, l.ckpt.params, gn);
  if (res.skipped_unseen > 0) {
    err << "skipped " << res.skipped_unseen
        << " triples whose entities never occur in training\n";
  }
  if (res.records.empty()) throw DataError("no evaluable queries in the " + f.split + " split");

  const MetricsReport pooled = aggregate_metrics(res.records);
  const MetricsReport raw = aggregate_metrics(res.records, true);
  const std::string text = format_metrics_text(pooled, &raw, f.diagnostics);
  out << text;

  std::vector<std::pair<std::string, MetricsReport>> rows{{"all", pooled}};
  for (Direction dir : {Direction::kTail, Direction::kHeadViaReverse}) {
    std::vector<RankRecord> part;
    for (const RankRecord& r : res.records) {
      if (r.direction == dir) part.push_back(r);
    }
    if (!part.empty()) rows.emplace_back(std::string(to_string(dir)), aggregate_metrics(part));
  }
  if (f.diagnostics) rows.emplace_back("all_raw", raw);
  if (!f.report.empty()) {
    write_text(f.report, text);
    fs::path twin = f.report;
    twin += ".tsv";
    write_text(twin, format_metrics_tsv(rows));
  }
  return kExitOk;
}

// --- eval-tc ----------------------------------------------------------------------

struct EvalTcFlags {
  EvalFlags eval;
  std::string thresholds_out;
};

int cmd_eval_tc(const EvalTcFlags& f, std::ostream& out, std::ostream&) {
  const Loaded l = load_for_eval(f.eval, Task::kClassification);
  const Dataset& d = *l.data;
  Scorer dn(checkpoint_scorer(l.ckpt, Role::kDiscriminator), static_cast<std::int32_t>(l.ckpt.k));
  dn.bind(l.ckpt.params);
  if (d.valid_labeled.triples.empty() || d.test_labeled.triples.empty()) {
    throw DataError("classification needs nonempty labeled valid and test files");
  }
  const auto vscores = score_triples(d.valid_labeled.triples, l.ckpt.params, dn);
  const ThresholdTable table = select_thresholds(vscores, d.valid_labeled.triples,
                                                 d.valid_labeled.labels,
                                                 d.kg.vocab.num_relations());
  const auto tscores = score_triples(d.test_labeled.triples, l.ckpt.params, dn);
  const double valid_acc = classification_accuracy(vscores, d.valid_labeled.triples,
                                                   d.valid_labeled.labels, table);
  const double acc = classification_accuracy(tscores, d.test_labeled.triples,
                                             d.test_labeled.labels, table);
  out << "valid_accuracy\t" << percent1(valid_acc) << '\n';
  out << "accuracy\t" << percent1(acc) << '\n';
  if (!f.thresholds_out.empty()) write_text(f.thresholds_out, format_thresholds(table, d.kg.vocab));
  return kExitOk;
}

// --- grid -------------------------------------------------------------------------

struct GridFlags {
  DataFlags data;
  ModelFlags model;
  std::string out;
  std::string grid_file;
  std::string state;
  int budget_epochs = 5;
  std::size_t max_candidates = 0;
  std::size_t top = 10;
};

template <typename T>
std::vector<T> grid_values(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  const json& v = j.at(key);
  if (!v.is_array() || v.empty()) {
    throw DataError(std::string("grid key '") + key + "' must be a nonempty array");
  }
  return v.get<std::vector<T>>();
}

HyperGrid grid_from_json(const json& j) {
  static const char* const kKeys[] = {"k", "gamma", "eta", "batch", "lambda",
                                      "ncritic", "clip", "layers", "hidden", "filters"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys),
                     [&](const char* k) { return key == k; }) == std::end(kKeys)) {
      throw DataError("unknown grid key '" + key + "'");
    }
  }
  // Absent keys keep the base flag value.
  HyperGrid g;
  g.k = grid_values<std::int32_t>(j, "k");
  g.gamma = grid_values<double>(j, "gamma");
  g.eta = grid_values<double>(j, "eta");
  g.batch = grid_values<std::int32_t>(j, "batch");
  g.weight_decay = grid_values<double>(j, "lambda");
  g.n_critic = grid_values<std::int32_t>(j, "ncritic");
  g.clip = grid_values<double>(j, "clip");
  g.layers = grid_values<std::int32_t>(j, "layers");
  g.hidden = grid_values<std::int32_t>(j, "hidden");
  g.filters = grid_values<std::int32_t>(j, "filters");
  return g;
}

json grid_json(const HyperGrid& g) {
  return json{{"k", g.k},           {"gamma", g.gamma},       {"eta", g.eta},
              {"batch", g.batch},   {"lambda", g.weight_decay}, {"ncritic", g.n_critic},
              {"clip", g.clip},     {"layers", g.layers},     {"hidden", g.hidden},
              {"filters", g.filters}};
}

json metric_json(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double metric_from_json(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

int cmd_grid(const GridFlags& f, std::ostream& out, std::ostream& err) {
  const TrainConfig base = f.model.build();
  if (f.out.empty()) throw UsageError("--out is required");
  if (f.budget_epochs <= 0) throw UsageError("--budget-epochs must be positive");
  const Task task = parse_task(f.data.task);
  const DataPaths paths = resolve_paths(f.data);
  const HyperGrid grid = f.grid_file.empty() ? HyperGrid{} : grid_from_json(read_json(f.grid_file));
  if (grid.size() == 0) throw UsageError("the grid is empty");
  const std::string started = now_utc();
  const auto data = load_dataset(paths, task);

  const fs::path dir = f.out;
  fs::create_directories(dir);
  const fs::path state_path = f.state.empty() ? dir / kGridStateFile : fs::path(f.state);

  json state{{"version", kVersion},
             {"grid", grid_json(grid)},
             {"base", config_json(base)},
             {"budget_epochs", f.budget_epochs},
             {"dataset", dataset_json(*data)},
             {"completed", json::array()}};
  GridSearchOptions options;
  options.budget_epochs = f.budget_epochs;
  options.max_candidates = f.max_candidates;
  if (fs::exists(state_path)) {
    const json prev = read_json(state_path);
    for (const char* key : {"grid", "base", "budget_epochs"}) {
      if (prev.at(key) != state.at(key)) {
        throw DataError(state_path.string() + " belongs to a different search (" + key +
                        " differs); remove it or pass another --state");
      }
    }
    if (prev.at("dataset").at("vocab_digest") != state.at("dataset").at("vocab_digest")) {
      throw DataError(state_path.string() + " was built on a different dataset");
    }
    state["completed"] = prev.at("completed");
    for (const json& e : state["completed"]) {
      const auto index = e.at("index").get<std::size_t>();
      options.completed.push_back({index, grid.candidate(index, base), metric_from_json(e.at("metric"))});
    }
    err << "resuming: " << options.completed.size() << " of " << grid.size()
        << " candidates already done\n";
  }
  options.on_candidate = [&](const GridEntry& e) {
    state["completed"].push_back(json{{"index", e.index}, {"metric", metric_json(e.metric)}});
    write_text_atomic(state_path, state.dump(1) + "\n");
    out << "candidate\t" << e.index << '\t' << shortest(e.metric) << '\n';
  };

  const GridSearchResult result =
      best_config_search(data->kg, grid, base, make_validator(*data), std::move(options));

  out << "rank\tindex\tmetric\tk\tgamma\teta\tbatch\tlambda\tncritic\tclip\n";
  const std::size_t shown = f.top == 0 ? result.leaderboard.size()
                                       : std::min(f.top, result.leaderboard.size());
  for (std::size_t i = 0; i < shown; ++i) {
    const GridEntry& e = result.leaderboard[i];
    const TrainConfig& c = e.config;
    out << i + 1 << '\t' << e.index << '\t' << shortest(e.metric) << '\t' << c.k << '\t'
        << shortest(c.gamma) << '\t' << shortest(c.eta) << '\t' << c.batch << '\t'
        << shortest(c.weight_decay) << '\t' << c.n_critic << '\t' << shortest(c.clip) << '\n';
  }
  if (!result.complete) {
    out << "incomplete\t" << result.leaderboard.size() << '/' << grid.size()
        << "\trerun with the same flags to resume\n";
    return kExitOk;
  }
  const GridEntry& best = result.leaderboard.front();
  TrainConfig winner = best.config;
  const json manifest{{"version", kVersion},
                      {"command", "grid"},
                      {"config", config_json(winner)},
                      {"seed", winner.seed},
                      {"grid_index", best.index},
                      {"metric", metric_json(best.metric)},
                      {"budget_epochs", f.budget_epochs},
                      {"candidates", grid.size()},
                      {"dataset", dataset_json(*data)},
                      {"started", started},
                      {"finished", now_utc()}};
  write_text_atomic(dir / kWinnerFile, manifest.dump(2) + "\n");
  out << "winner\t" << (dir / kWinnerFile).string() << '\n';
  return kExitOk;
}

// --- export -----------------------------------------------------------------------

struct ExportFlags {
  std::string checkpoint;
  std::string vocab_dir;
  std::string out;
};

void export_table(const fs::path& path, const MatrixF& table,
                  const std::vector<std::string>& names) {
  std::string text;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    text += format_embedding_row(names[static_cast<std::size_t>(i)],
                                 {table.row(i).data(), static_cast<std::size_t>(table.cols())});
    text += '\n';
  }
  write_text(path, text);
}

int cmd_export(const ExportFlags& f, std::ostream& out, std::ostream&) {
  if (f.checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (f.out.empty()) throw UsageError("--out is required");
  const Checkpoint c = load_checkpoint(f.checkpoint);
  const fs::path vocab =
      f.vocab_dir.empty() ? fs::path(f.checkpoint).parent_path() : fs::path(f.vocab_dir);
  fs::path ent = vocab / kEntitiesFile;
  fs::path rel = vocab / kRelationsFile;
  // Periodic checkpoints sit in a subdirectory of the run.
  if (f.vocab_dir.empty() && !fs::exists(ent) && !fs::exists(rel)) {
    ent = vocab.parent_path() / kEntitiesFile;
    rel = vocab.parent_path() / kRelationsFile;
  }
  const auto entities = load_name_table(ent);
  const auto relations = load_name_table(rel);
  if (entities.size() != c.n || relations.size() != c.m) {
    throw DataError("vocabulary tables list " + std::to_string(entities.size()) + " entities and " +
                    std::to_string(relations.size()) + " relations; the checkpoint has " +
                    std::to_string(c.n) + " and " + std::to_string(c.m));
  }
  const fs::path dir = f.out;
  fs::create_directories(dir);
  export_table(dir / kEntityEmbeddingsFile, c.params.at(kEntityTable).value, entities);
  export_table(dir / kRelationEmbeddingsFile, c.params.at(kRelationTable).value, relations);
  out << "entities\t" << (dir / kEntityEmbeddingsFile).string() << '\n';
  out << "relations\t" << (dir / kRelationEmbeddingsFile).string() << '\n';
  return kExitOk;
}

}  // namespace

std::string format_embedding_row(const std::string& name, std::span<const float> values) {
  std::string s = name;
  char buf[32];
  for (float v : values) {
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    s += '\t';
    s.append(buf, r.ptr);
  }
  return s;
}

std::vector<std::pair<std::string, std::vector<float>>> load_embeddings(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    std::pair<std::string, std::vector<float>> row{line.substr(0, tab), {}};
    while (tab != std::string::npos) {
      const std::size_t start = tab + 1;
      tab = line.find('\t', start);
      const std::size_t end = tab == std::string::npos ? line.size() : tab;
      float v = 0.0f;
      auto r = std::from_chars(line.data() + start, line.data() + end, v);
      if (r.ec != std::errc() || r.ptr != line.data() + end) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad number");
      }
      row.second.push_back(v);
    }
    if (rows.empty()) width = row.second.size();
    if (row.second.size() != width) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(width) + " values, got " +
                      std::to_string(row.second.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial knowledge-graph embeddings", "kgadv"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrainFlags train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a generator/discriminator pair");
  add_data_flags(train_cmd, train.data, true);
  add_model_flags(train_cmd, train.model);
  add(train_cmd, "out", train.out, "Run directory");

  EvalLpFlags lp;
  CLI::App* lp_cmd = app.add_subcommand("eval-lp", "Filtered link prediction with the generator");
  add_eval_flags(lp_cmd, lp.eval);
  add(lp_cmd, "split", lp.split, "Split to rank: test or valid")->capture_default_str();
  add(lp_cmd, "report", lp.report, "Write the report here plus a .tsv twin");
  lp_cmd->add_flag("--diagnostics", lp.diagnostics, "Also print Hits@1, Hits@3 and raw metrics")
      ->envname(env_name("diagnostics"));

  EvalTcFlags tc;
  CLI::App* tc_cmd = app.add_subcommand("eval-tc", "Triple classification with the discriminator");
  add_eval_flags(tc_cmd, tc.eval);
  add(tc_cmd, "thresholds-out", tc.thresholds_out, "Write per-relation thresholds here");

  GridFlags grid;
  CLI::App* grid_cmd = app.add_subcommand("grid", "Hyperparameter grid search");
  add_data_flags(grid_cmd, grid.data, true);
  add_model_flags(grid_cmd, grid.model);
  add(grid_cmd, "out", grid.out, "Search directory");
  add(grid_cmd, "grid", grid.grid_file, "JSON grid; absent keys keep the flag value");
  add(grid_cmd, "state", grid.state, "Resume state file (default: OUT/grid_state.json)");
  add(grid_cmd, "budget-epochs", grid.budget_epochs, "Epochs per candidate")->capture_default_str();
  add(grid_cmd, "max-candidates", grid.max_candidates, "Stop after this many new candidates (0: all)")
      ->capture_default_str();
  add(grid_cmd, "top", grid.top, "Leaderboard rows to print (0: all)")->capture_default_str();

  ExportFlags exp;
  CLI::App* exp_cmd = app.add_subcommand("export", "Write embeddings as text");
  add(exp_cmd, "checkpoint", exp.checkpoint, "Checkpoint to export");
  add(exp_cmd, "vocab-dir", exp.vocab_dir, "Directory with entities.tsv and relations.tsv");
  add(exp_cmd, "out", exp.out, "Output directory");

  std::vector<std::string> argv_store{"kgadv"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train, out, err);
    if (lp_cmd->parsed()) return cmd_eval_lp(lp, out, err);
    if (tc_cmd->parsed()) return cmd_eval_tc(tc, out, err);
    if (grid_cmd->parsed()) return cmd_grid(grid, out, err);
    if (exp_cmd->parsed()) return cmd_export(exp, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace kgadv::cli

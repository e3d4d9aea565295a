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

// Generator/discriminator minimax training.
//
// Each batch runs n_critic discriminator updates followed by one generator
// update. A discriminator update sees, for every positive (h, r, t), the
// generated tail t'_g = G(h, r) (held fixed) and a sampled negative, and
// minimizes
//
//   sum 2 f_D(h,r,t) - f_D(h,r,t'_g) - f_D(h,r,t')             neural D
//   sum [2 f_D(h,r,t) - f_D(h,r,t'_g) - f_D(h,r,t') + gamma]_+  translation D
//
// then clips discriminator and shared parameters to [-c, c]. A generator
// update minimizes
//
//   sum f_D(h,r,t'_g)                                            neural G
//   sum [f(h,r,t) - f(h,r,t') + gamma]_+ + f_D(h,r,t'_g)         translation G
//
// with the discriminator's own parameters frozen. E and R are shared and
// move in both phases.

#ifndef KGADV_ADVTRAIN_H_
#define KGADV_ADVTRAIN_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgadv/autodiff.h"
#include "kgadv/checkpoint.h"
#include "kgadv/kgdata.h"
#include "kgadv/optim.h"
#include "kgadv/scorers.h"

namespace kgadv {

struct TrainConfig {
  std::int32_t k = 100;
  double gamma = 1.0;          // margin
  double eta = 0.001;          // learning rate
  std::int32_t batch = 5000;
  double weight_decay = 1e-5;  // lambda
  std::int32_t n_critic = 1;
  double clip = 0.01;          // c
  std::int32_t epochs = 1000;
  SamplingMode sampling = SamplingMode::kUniform;
  std::uint64_t seed = 1;
  ScorerSpec gn{Family::kTransE, Role::kGenerator};
  ScorerSpec dn{Family::kMlp, Role::kDiscriminator};
  /// Validation rounds without improvement before stopping; 0 disables.
  std::int32_t patience = 20;
  std::int32_t eval_every = 1;
  /// Write a checkpoint every N epochs; 0 writes only the final one.
  std::int32_t checkpoint_every = 0;
  /// Restrict hyperparameters to the published search grid.
  bool grid_mode = false;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// One set of training instances. negatives[i] corrupts positives[i].
struct Batch {
  std::vector<Triple> positives;
  std::vector<Triple> negatives;
  std::size_t exhausted = 0;

  std::size_t size() const { return positives.size(); }
};

struct EpochReport {
  std::int32_t epoch = 0;
  double mean_loss_d = 0.0;  // per instance, averaged over critic steps
  double mean_loss_g = 0.0;  // per instance
  double seconds = 0.0;
  std::size_t exhausted_negatives = 0;
};

// Losses over B x 1 score columns; each returns the batch sum as 1 x 1.
Var loss_d_wgan(Var pos, Var gen, Var neg);
Var loss_d_margin(Var pos, Var gen, Var neg, double gamma);
Var loss_g_neural(Var gen);
Var loss_g_translation(Var pos, Var neg, Var gen, double gamma);

inline constexpr GroupMask kCriticGroups = Group::kShared | Group::kDiscriminator;
inline constexpr GroupMask kGeneratorGroups = Group::kShared | Group::kGenerator;

class AdversarialTrainer {
 public:
  /// Fresh parameters drawn from cfg.seed. `kg` must outlive the trainer.
  AdversarialTrainer(const KnowledgeGraph& kg, TrainConfig cfg);
  /// Resumes from existing parameters at `epoch`.
  AdversarialTrainer(const KnowledgeGraph& kg, TrainConfig cfg, ParamStore store,
                     std::int32_t epoch);

  /// Shuffles train (seeded by seed + epoch), runs every batch, and returns
  /// per-instance mean losses. Throws NumericError on a non-finite loss and
  /// std::logic_error on an empty training split.
  EpochReport train_epoch();

  /// Samples one negative per positive from the trainer's negative stream.
  Batch make_batch(std::span<const Triple> positives);

  Var discriminator_loss(Graph& g, const Batch& batch) const;
  Var generator_loss(Graph& g, const Batch& batch) const;
  /// One discriminator update plus clipping; returns the batch loss.
  double critic_step(const Batch& batch);
  /// One generator update; returns the batch loss.
  double generator_step(const Batch& batch);

  /// Called with the store after every critic update (after clipping).
  void set_critic_observer(std::function<void(const ParamStore&)> fn) {
    critic_observer_ = std::move(fn);
  }

  const TrainConfig& config() const { return cfg_; }
  std::int32_t epoch() const { return epoch_; }
  const ParamStore& store() const { return store_; }
  ParamStore& mutable_store() { return store_; }
  const Scorer& generator() const { return gn_; }
  const Scorer& discriminator() const { return dn_; }
  const KnowledgeGraph& graph() const { return kg_; }

  Checkpoint to_checkpoint() const;

 private:
  void setup();

  const KnowledgeGraph& kg_;
  TrainConfig cfg_;
  ParamStore store_;
  Scorer gn_;
  Scorer dn_;
  RmsProp opt_;
  std::optional<BernStats> bern_;
  std::int32_t epoch_ = 0;
  Rng negatives_;
  std::function<void(const ParamStore&)> critic_observer_;
};

/// Builds a trainer whose parameters and scorer specs come from a checkpoint.
/// Throws DataError when the checkpoint's n, m or k disagree with `kg`.
ScorerSpec checkpoint_scorer(const Checkpoint& ckpt, Role role);

// --- run driver ---------------------------------------------------------------

struct RunHooks {
  /// Validation metric, higher is better. Unset disables validation.
  std::function<double(const AdversarialTrainer&)> validate;
  /// Called after every epoch; `valid` is NaN when not evaluated.
  std::function<void(const EpochReport&, double valid)> on_epoch;
  /// Called every checkpoint_every epochs.
  std::function<void(const AdversarialTrainer&)> on_checkpoint;
};

struct RunResult {
  std::vector<EpochReport> epochs;
  std::vector<double> valid_metrics;  // one per epoch, NaN when skipped
  double best_valid = 0.0;
  std::int32_t best_epoch = 0;
  bool stopped_early = false;
};

/// Trains up to cfg.epochs epochs with early stopping on the validation
/// metric. When validation runs, the trainer's store is left at the best
/// validated parameters.
RunResult run_training(AdversarialTrainer& trainer, const RunHooks& hooks);

/// Formats one metrics-log line: epoch, mean_L_D, mean_L_G, valid, seconds.
std::string format_epoch_line(const EpochReport& report, double valid);

// --- grid search --------------------------------------------------------------

struct HyperGrid {
  std::vector<std::int32_t> k{50, 100, 200};
  std::vector<double> gamma{0.5, 1.0, 2.0};
  std::vector<double> eta{0.001, 0.0005, 0.0001};
  std::vector<std::int32_t> batch{1000, 5000, 10000};
  std::vector<double> weight_decay{0.0, 0.00001};
  std::vector<std::int32_t> n_critic{1, 3, 5};
  std::vector<double> clip{0.01, 0.05, 0.1};
  // Neural architecture options; empty keeps the base config's value.
  std::vector<std::int32_t> layers;
  std::vector<std::int32_t> hidden;
  std::vector<std::int32_t> filters;

  std::size_t size() const;
  /// The i-th combination in row-major order (k varies slowest).
  TrainConfig candidate(std::size_t i, const TrainConfig& base) const;
};

/// Published search values, used when grid_mode validation is on.
const HyperGrid& published_grid();

struct GridEntry {
  std::size_t index = 0;
  TrainConfig config;
  double metric = 0.0;
};

struct GridSearchOptions {
  std::int32_t budget_epochs = 5;
  /// Stop after this many newly trained candidates; 0 means no limit.
  std::size_t max_candidates = 0;
  /// Results already known (resume); their candidates are not retrained.
  std::vector<GridEntry> completed;
  std::function<void(const GridEntry&)> on_candidate;
};

struct GridSearchResult {
  /// Sorted by metric descending, ties by index ascending.
  std::vector<GridEntry> leaderboard;
  bool complete = false;
};

/// Trains each candidate for exactly budget_epochs epochs and ranks them by
/// `validate`. Throws std::invalid_argument on an empty grid.
GridSearchResult best_config_search(
    const KnowledgeGraph& kg, const HyperGrid& grid, const TrainConfig& base,
    const std::function<double(const AdversarialTrainer&)>& validate,
    GridSearchOptions options);

}  // namespace kgadv

#endif  // KGADV_ADVTRAIN_H_

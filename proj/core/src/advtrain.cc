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

#include "kgadv/advtrain.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace kgadv {
namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kNegativeStream = 1;
constexpr char kEpochField[] = "train.epoch";

template <typename T>
bool in_values(const std::vector<T>& values, T v) {
  for (T x : values) {
    if constexpr (std::is_floating_point_v<T>) {
      if (std::abs(x - v) <= 1e-12 * std::max(1.0, std::abs(x))) return true;
    } else {
      if (x == v) return true;
    }
  }
  return false;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("TrainConfig: " + what);
}

Var filled(Graph& g, Eigen::Index rows, double v) {
  return g.constant(MatrixD::Constant(rows, 1, v));
}

void check_finite(double v, const char* what, std::int32_t epoch, std::size_t batch) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + what + " at epoch " +
                       std::to_string(epoch) + ", batch " + std::to_string(batch));
  }
}

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Split {
  std::vector<std::int32_t> heads, rels, tails, neg_heads, neg_tails;
};

Split split(const Batch& b) {
  Split s;
  s.heads.reserve(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    s.heads.push_back(b.positives[i].head);
    s.rels.push_back(b.positives[i].rel);
    s.tails.push_back(b.positives[i].tail);
    s.neg_heads.push_back(b.negatives[i].head);
    s.neg_tails.push_back(b.negatives[i].tail);
  }
  return s;
}

// A corrupted head changes the query pair, so the negative is scored on its
// own (head, rel) with its own tail entity.
Var score_negatives(Graph& g, const Scorer& s, const Split& sp) {
  return s.score_entities(g, sp.neg_heads, sp.rels, sp.neg_tails);
}

}  // namespace

// --- config -------------------------------------------------------------------

void TrainConfig::validate() const {
  require(k > 0, "k must be positive");
  require(gamma >= 0.0 && std::isfinite(gamma), "gamma must be finite and >= 0");
  require(eta > 0.0 && std::isfinite(eta), "eta must be positive");
  require(batch > 0, "batch must be positive");
  require(weight_decay >= 0.0 && std::isfinite(weight_decay), "lambda must be >= 0");
  require(n_critic > 0, "n_critic must be positive");
  require(clip > 0.0 && std::isfinite(clip), "clip must be positive");
  require(epochs >= 0, "epochs must be >= 0");
  require(patience >= 0, "patience must be >= 0");
  require(eval_every > 0, "eval_every must be positive");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  require(gn.role == Role::kGenerator, "gn spec must have the generator role");
  require(dn.role == Role::kDiscriminator, "dn spec must have the discriminator role");
  gn.validate();
  dn.validate();
  if (grid_mode) {
    const HyperGrid& p = published_grid();
    require(in_values(p.k, k), "k not in grid {50,100,200}");
    require(in_values(p.gamma, gamma), "gamma not in grid {0.5,1,2}");
    require(in_values(p.eta, eta), "eta not in grid {0.001,0.0005,0.0001}");
    require(in_values(p.batch, batch), "batch not in grid {1000,5000,10000}");
    require(in_values(p.weight_decay, weight_decay), "lambda not in grid {0,0.00001}");
    require(in_values(p.n_critic, n_critic), "n_critic not in grid {1,3,5}");
    require(in_values(p.clip, clip), "clip not in grid {0.01,0.05,0.1}");
  }
}

// --- losses -------------------------------------------------------------------

Var loss_d_wgan(Var pos, Var gen, Var neg) {
  return sum(2.0 * pos - gen - neg);
}

Var loss_d_margin(Var pos, Var gen, Var neg, double gamma) {
  Graph& g = *pos.graph();
  return sum(relu(2.0 * pos - gen - neg + filled(g, pos.rows(), gamma)));
}

Var loss_g_neural(Var gen) { return sum(gen); }

Var loss_g_translation(Var pos, Var neg, Var gen, double gamma) {
  Graph& g = *pos.graph();
  return sum(relu(pos - neg + filled(g, pos.rows(), gamma))) + sum(gen);
}

// --- trainer ------------------------------------------------------------------

AdversarialTrainer::AdversarialTrainer(const KnowledgeGraph& kg, TrainConfig cfg)
    : kg_(kg),
      cfg_(std::move(cfg)),
      gn_(cfg_.gn, cfg_.k),
      dn_(cfg_.dn, cfg_.k),
      negatives_(Rng::derive(cfg_.seed, kNegativeStream)) {
  cfg_.validate();
  Rng rng = Rng::derive(cfg_.seed, kInitStream);
  store_ = init_embeddings(kg_.vocab.num_entities(), kg_.vocab.num_relations(), cfg_.k, rng);
  gn_.register_params(store_, rng);
  dn_.register_params(store_, rng);
  setup();
}

AdversarialTrainer::AdversarialTrainer(const KnowledgeGraph& kg, TrainConfig cfg,
                                       ParamStore store, std::int32_t epoch)
    : kg_(kg),
      cfg_(std::move(cfg)),
      store_(std::move(store)),
      gn_(cfg_.gn, cfg_.k),
      dn_(cfg_.dn, cfg_.k),
      epoch_(epoch),
      negatives_(Rng::derive(cfg_.seed, kNegativeStream)) {
  cfg_.validate();
  setup();
}

void AdversarialTrainer::setup() {
  gn_.bind(store_);
  dn_.bind(store_);
  opt_ = RmsProp(RmsPropOptions{.learning_rate = cfg_.eta,
                                .weight_decay = cfg_.weight_decay});
  if (cfg_.sampling == SamplingMode::kBernoulli) {
    bern_ = compute_bern_stats(kg_.train, kg_.vocab.num_relations());
  }
}

Batch AdversarialTrainer::make_batch(std::span<const Triple> positives) {
  Batch b;
  b.positives.assign(positives.begin(), positives.end());
  b.negatives.reserve(positives.size());
  const BernStats* bern = bern_ ? &*bern_ : nullptr;
  for (const Triple& t : positives) {
    NegativeSample ns = sample_negative(t, cfg_.sampling, kg_.vocab.num_entities(),
                                        kg_.truth, bern, negatives_);
    b.negatives.push_back(ns.triple);
    if (ns.exhausted) ++b.exhausted;
  }
  return b;
}

Var AdversarialTrainer::discriminator_loss(Graph& g, const Batch& batch) const {
  Split sp = split(batch);
  Var gen = detach(gn_.generate(g, sp.heads, sp.rels));
  Var pos = dn_.score_entities(g, sp.heads, sp.rels, sp.tails);
  Var fake = dn_.score(g, sp.heads, sp.rels, gen, {});
  Var neg = score_negatives(g, dn_, sp);
  if (is_translation(dn_.spec().family)) return loss_d_margin(pos, fake, neg, cfg_.gamma);
  return loss_d_wgan(pos, fake, neg);
}

Var AdversarialTrainer::generator_loss(Graph& g, const Batch& batch) const {
  Split sp = split(batch);
  Var gen = gn_.generate(g, sp.heads, sp.rels);
  Var fake = dn_.score(g, sp.heads, sp.rels, gen, {});
  if (!is_translation(gn_.spec().family)) return loss_g_neural(fake);
  Var pos = gn_.score_entities(g, sp.heads, sp.rels, sp.tails);
  Var neg = score_negatives(g, gn_, sp);
  return loss_g_translation(pos, neg, fake, cfg_.gamma);
}

double AdversarialTrainer::critic_step(const Batch& batch) {
  Graph g(store_, kCriticGroups);
  Var loss = discriminator_loss(g, batch);
  double value = loss.scalar();
  check_finite(value, "L_D", epoch_ + 1, 0);
  GradMap grads = g.backward(loss);
  opt_.step(store_, grads);
  dn_.renormalize(store_);
  clip_weights(store_, kCriticGroups, static_cast<float>(cfg_.clip));
  if (critic_observer_) critic_observer_(store_);
  return value;
}

double AdversarialTrainer::generator_step(const Batch& batch) {
  Graph g(store_, kGeneratorGroups);
  Var loss = generator_loss(g, batch);
  double value = loss.scalar();
  check_finite(value, "L_G", epoch_ + 1, 0);
  GradMap grads = g.backward(loss);
  opt_.step(store_, grads);
  gn_.renormalize(store_);
  return value;
}

EpochReport AdversarialTrainer::train_epoch() {
  if (kg_.train.empty()) throw std::logic_error("train_epoch: empty training split");
  auto start = std::chrono::steady_clock::now();
  const std::int32_t epoch = epoch_ + 1;

  std::vector<Triple> order(kg_.train.begin(), kg_.train.end());
  Rng shuffle(cfg_.seed + static_cast<std::uint64_t>(epoch));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[shuffle.below(i)]);
  }
  negatives_ = Rng::derive(cfg_.seed + static_cast<std::uint64_t>(epoch), kNegativeStream);

  double total_d = 0.0, total_g = 0.0;
  std::size_t count_d = 0, count_g = 0, exhausted = 0, batch_no = 0;
  const std::size_t bsz = static_cast<std::size_t>(cfg_.batch);
  for (std::size_t lo = 0; lo < order.size(); lo += bsz, ++batch_no) {
    std::span<const Triple> chunk(order.data() + lo, std::min(bsz, order.size() - lo));
    for (std::int32_t c = 0; c < cfg_.n_critic; ++c) {
      Batch b = make_batch(chunk);
      exhausted += b.exhausted;
      double ld;
      try {
        ld = critic_step(b);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (critic batch " +
                           std::to_string(batch_no) + ")");
      }
      total_d += ld;
      count_d += b.size();
    }
    Batch b = make_batch(chunk);
    exhausted += b.exhausted;
    double lg;
    try {
      lg = generator_step(b);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (generator batch " +
                         std::to_string(batch_no) + ")");
    }
    total_g += lg;
    count_g += b.size();
  }
  epoch_ = epoch;

  EpochReport r;
  r.epoch = epoch;
  r.mean_loss_d = total_d / static_cast<double>(count_d);
  r.mean_loss_g = total_g / static_cast<double>(count_g);
  r.exhausted_negatives = exhausted;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

Checkpoint AdversarialTrainer::to_checkpoint() const {
  Checkpoint c;
  c.n = static_cast<std::uint32_t>(kg_.vocab.num_entities());
  c.m = static_cast<std::uint32_t>(kg_.vocab.num_relations());
  c.k = static_cast<std::uint32_t>(cfg_.k);
  c.params = store_;
  c.fields = gn_.spec().to_fields();
  c.fields.merge(dn_.spec().to_fields());
  c.fields[kEpochField] = static_cast<float>(epoch_);
  return c;
}

ScorerSpec checkpoint_scorer(const Checkpoint& ckpt, Role role) {
  return ScorerSpec::from_fields(ckpt.fields, role);
}

// --- run driver ---------------------------------------------------------------

RunResult run_training(AdversarialTrainer& trainer, const RunHooks& hooks) {
  const TrainConfig& cfg = trainer.config();
  RunResult result;
  result.best_valid = -std::numeric_limits<double>::infinity();
  std::optional<ParamStore> best;
  std::int32_t stale = 0;
  while (trainer.epoch() < cfg.epochs) {
    EpochReport rep = trainer.train_epoch();
    double valid = std::numeric_limits<double>::quiet_NaN();
    bool stop = false;
    if (hooks.validate && rep.epoch % cfg.eval_every == 0) {
      valid = hooks.validate(trainer);
      if (valid > result.best_valid) {
        result.best_valid = valid;
        result.best_epoch = rep.epoch;
        best = trainer.store();
        stale = 0;
      } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
        stop = true;
      }
    }
    result.epochs.push_back(rep);
    result.valid_metrics.push_back(valid);
    if (hooks.on_epoch) hooks.on_epoch(rep, valid);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 &&
        rep.epoch % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(trainer);
    }
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  if (best) trainer.mutable_store() = std::move(*best);
  if (!best) result.best_valid = std::numeric_limits<double>::quiet_NaN();
  return result;
}

std::string format_epoch_line(const EpochReport& report, double valid) {
  char secs[32];
  auto res = std::to_chars(secs, secs + sizeof(secs), report.seconds,
                           std::chars_format::fixed, 3);
  return std::to_string(report.epoch) + '\t' + shortest(report.mean_loss_d) + '\t' +
         shortest(report.mean_loss_g) + '\t' + shortest(valid) + '\t' +
         std::string(secs, res.ptr);
}

// --- grid search --------------------------------------------------------------

namespace {

template <typename T>
std::size_t dim(const std::vector<T>& v) {
  return v.empty() ? 1 : v.size();
}

template <typename T>
void pick(const std::vector<T>& v, std::size_t& i, T& out) {
  std::size_t d = dim(v);
  std::size_t j = i % d;
  i /= d;
  if (!v.empty()) out = v[j];
}

}  // namespace

std::size_t HyperGrid::size() const {
  if (k.empty() && gamma.empty() && eta.empty() && batch.empty() &&
      weight_decay.empty() && n_critic.empty() && clip.empty() && layers.empty() &&
      hidden.empty() && filters.empty()) {
    return 0;
  }
  return dim(k) * dim(gamma) * dim(eta) * dim(batch) * dim(weight_decay) *
         dim(n_critic) * dim(clip) * dim(layers) * dim(hidden) * dim(filters);
}

TrainConfig HyperGrid::candidate(std::size_t i, const TrainConfig& base) const {
  if (i >= size()) throw std::out_of_range("HyperGrid::candidate: index out of range");
  TrainConfig c = base;
  int layers_v = 0, hidden_v = 0, filters_v = 0;
  // Last dimension varies fastest.
  pick(filters, i, filters_v);
  pick(hidden, i, hidden_v);
  pick(layers, i, layers_v);
  pick(clip, i, c.clip);
  pick(n_critic, i, c.n_critic);
  pick(weight_decay, i, c.weight_decay);
  pick(batch, i, c.batch);
  pick(eta, i, c.eta);
  pick(gamma, i, c.gamma);
  pick(k, i, c.k);
  for (ScorerSpec* s : {&c.gn, &c.dn}) {
    if (!layers.empty()) s->layers = layers_v;
    if (!hidden.empty()) s->hidden = hidden_v;
    if (!filters.empty()) s->filters = filters_v;
  }
  return c;
}

const HyperGrid& published_grid() {
  static const HyperGrid grid;
  return grid;
}

GridSearchResult best_config_search(
    const KnowledgeGraph& kg, const HyperGrid& grid, const TrainConfig& base,
    const std::function<double(const AdversarialTrainer&)>& validate,
    GridSearchOptions options) {
  const std::size_t n = grid.size();
  if (n == 0) throw std::invalid_argument("best_config_search: empty grid");
  if (!validate) throw std::invalid_argument("best_config_search: no validation metric");
  if (options.budget_epochs <= 0) {
    throw std::invalid_argument("best_config_search: budget must be positive");
  }

  GridSearchResult out;
  std::vector<bool> done(n, false);
  for (GridEntry& e : options.completed) {
    if (e.index >= n) throw std::invalid_argument("best_config_search: stale resume entry");
    if (done[e.index]) continue;
    done[e.index] = true;
    e.config = grid.candidate(e.index, base);
    out.leaderboard.push_back(e);
  }

  std::size_t trained = 0;
  out.complete = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (done[i]) continue;
    if (options.max_candidates > 0 && trained >= options.max_candidates) {
      out.complete = false;
      break;
    }
    TrainConfig cfg = grid.candidate(i, base);
    cfg.epochs = options.budget_epochs;
    cfg.patience = 0;
    AdversarialTrainer trainer(kg, cfg);
    run_training(trainer, RunHooks{});
    GridEntry e{i, grid.candidate(i, base), validate(trainer)};
    out.leaderboard.push_back(e);
    if (options.on_candidate) options.on_candidate(e);
    ++trained;
  }

  std::stable_sort(out.leaderboard.begin(), out.leaderboard.end(),
                   [](const GridEntry& a, const GridEntry& b) {
                     double x = std::isnan(a.metric) ? -HUGE_VAL : a.metric;
                     double y = std::isnan(b.metric) ? -HUGE_VAL : b.metric;
                     if (x != y) return x > y;
                     return a.index < b.index;
                   });
  return out;
}

}  // namespace kgadv

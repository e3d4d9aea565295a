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

#include "kgadv/scorers.h"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "kgadv/checkpoint.h"

namespace kgadv {
namespace {

void require_equal(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": dimension mismatch " + std::to_string(a) +
                     " vs " + std::to_string(b));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// M x = x + r_p (x_p . x)
std::vector<double> transd_map(std::span<const double> x, std::span<const double> xp,
                               std::span<const double> rp) {
  std::vector<double> out(x.begin(), x.end());
  if (xp.empty() && rp.empty()) return out;
  require_equal(xp.size(), x.size(), "transd projector");
  require_equal(rp.size(), x.size(), "transd projector");
  const double c = dot(xp, x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rp[i] * c;
  return out;
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::kTransE:
      return "transe";
    case Family::kTransH:
      return "transh";
    case Family::kTransD:
      return "transd";
    case Family::kMlp:
      return "mlp";
    case Family::kCnn:
      return "cnn";
  }
  return "?";
}

std::string_view to_string(Role r) {
  return r == Role::kGenerator ? "generator" : "discriminator";
}

std::string_view to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Family parse_family(std::string_view s) {
  for (Family f : {Family::kTransE, Family::kTransH, Family::kTransD, Family::kMlp,
                   Family::kCnn}) {
    if (s == to_string(f)) return f;
  }
  throw std::invalid_argument("unknown scorer family '" + std::string(s) +
                              "' (expected transe, transh, transd, mlp or cnn)");
}

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

void ScorerSpec::validate() const {
  if (layers < 1 || hidden < 1 || filters < 1 || width < 1) {
    throw std::invalid_argument("scorer sizes (layers, hidden, filters, width) must be positive");
  }
}

std::map<std::string, float> ScorerSpec::to_fields() const {
  const std::string p = role == Role::kGenerator ? "spec.gn." : "spec.dn.";
  return {
      {p + "family", static_cast<float>(family)},
      {p + "role", static_cast<float>(role)},
      {p + "layers", static_cast<float>(layers)},
      {p + "hidden", static_cast<float>(hidden)},
      {p + "filters", static_cast<float>(filters)},
      {p + "width", static_cast<float>(width)},
      {p + "activation", static_cast<float>(activation)},
  };
}

ScorerSpec ScorerSpec::from_fields(const std::map<std::string, float>& fields, Role role) {
  const std::string p = role == Role::kGenerator ? "spec.gn." : "spec.dn.";
  auto get = [&](const char* key) {
    auto it = fields.find(p + key);
    if (it == fields.end()) throw DataError("checkpoint lacks field '" + p + key + "'");
    return static_cast<int>(it->second);
  };
  ScorerSpec s;
  const int family = get("family");
  if (family < 0 || family > static_cast<int>(Family::kCnn)) {
    throw DataError("checkpoint names an unknown scorer family");
  }
  s.family = static_cast<Family>(family);
  s.role = role;
  s.layers = get("layers");
  s.hidden = get("hidden");
  s.filters = get("filters");
  s.width = get("width");
  s.activation = static_cast<Activation>(get("activation"));
  return s;
}

std::optional<std::string> pairing_warning(const ScorerSpec& gn, const ScorerSpec& dn) {
  if (!is_translation(gn.family) && !is_translation(dn.family)) {
    return "neither generator (" + std::string(to_string(gn.family)) +
           ") nor discriminator (" + std::string(to_string(dn.family)) +
           ") is translation-based; training may not converge";
  }
  return std::nullopt;
}

// --- reference formulas -------------------------------------------------------

double score_transe(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t) {
  require_equal(h.size(), r.size(), "score_transe");
  require_equal(h.size(), t.size(), "score_transe");
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double d = h[i] + r[i] - t[i];
    s += d * d;
  }
  return s;
}

std::vector<double> project_hyperplane(std::span<const double> x, std::span<const double> w) {
  require_equal(x.size(), w.size(), "project_hyperplane");
  const double norm = std::sqrt(dot(w, w));
  if (std::abs(norm - 1.0) > 1e-6) {
    throw std::invalid_argument("project_hyperplane: normal must have unit length, got " +
                                std::to_string(norm));
  }
  const double c = dot(w, x);
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= c * w[i];
  return out;
}

double score_transh(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t, std::span<const double> w) {
  const auto hp = project_hyperplane(h, w);
  const auto tp = project_hyperplane(t, w);
  return score_transe(hp, r, tp);
}

double score_transd(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t, const TransDProjectors& proj) {
  require_equal(h.size(), t.size(), "score_transd");
  const auto mh = transd_map(h, proj.head, proj.rel);
  const auto mt = transd_map(t, proj.tail, proj.rel);
  return score_transe(mh, r, mt);
}

std::vector<double> generate_translation(Family family, std::span<const double> h,
                                         std::span<const double> r,
                                         std::span<const double> w,
                                         const TransDProjectors& proj) {
  require_equal(h.size(), r.size(), "generate_translation");
  std::vector<double> base;
  switch (family) {
    case Family::kTransE:
      base.assign(h.begin(), h.end());
      break;
    case Family::kTransH:
      base = project_hyperplane(h, w);
      break;
    case Family::kTransD:
      base = transd_map(h, proj.head, proj.rel);
      break;
    default:
      throw std::invalid_argument("generate_translation: not a translation family");
  }
  for (std::size_t i = 0; i < base.size(); ++i) base[i] += r[i];
  return base;
}

// --- Scorer -------------------------------------------------------------------

Scorer::Scorer(ScorerSpec spec, std::int32_t k) : spec_(spec), k_(k) {
  spec_.validate();
  if (k < 1) throw std::invalid_argument("embedding size must be positive");
  if (spec_.family == Family::kCnn) {
    const std::int64_t input = spec_.role == Role::kGenerator ? 2 * k : 3 * k;
    if (spec_.width > input) {
      throw ShapeError("CNN filter width " + std::to_string(spec_.width) +
                       " exceeds input length " + std::to_string(input));
    }
  }
}

std::string_view Scorer::prefix() const {
  return spec_.role == Role::kGenerator ? kGeneratorPrefix : kDiscriminatorPrefix;
}

Group Scorer::group() const {
  return spec_.role == Role::kGenerator ? Group::kGenerator : Group::kDiscriminator;
}

std::string Scorer::name(std::string_view leaf) const {
  return std::string(prefix()) + std::string(leaf);
}

std::int64_t Scorer::feature_map_size(std::int64_t input_len) const {
  return static_cast<std::int64_t>(spec_.filters) * (input_len - spec_.width + 1);
}

void Scorer::register_params(ParamStore& store, Rng& rng) const {
  const auto& e = store.at(kEntityTable);
  const auto& r = store.at(kRelationTable);
  const auto n = static_cast<std::uint32_t>(e.value.rows());
  const auto m = static_cast<std::uint32_t>(r.value.rows());
  const auto k = static_cast<std::uint32_t>(k_);
  if (e.value.cols() != k_ || r.value.cols() != k_) {
    throw ShapeError("embedding tables do not have " + std::to_string(k_) + " columns");
  }
  const Group grp = group();
  const bool gen = spec_.role == Role::kGenerator;
  switch (spec_.family) {
    case Family::kTransE:
      break;
    case Family::kTransH: {
      const ParamId w = store.add(name("W"), grp, {m, k});
      init_unit_rows(store[w].value, rng);
      break;
    }
    case Family::kTransD: {
      const ParamId ep = store.add(name("Ep"), grp, {n, k});
      const ParamId rp = store.add(name("Rp"), grp, {m, k});
      init_unit_rows(store[ep].value, rng);
      init_unit_rows(store[rp].value, rng);
      break;
    }
    case Family::kMlp: {
      const std::uint32_t in = gen ? 2 * k : 3 * k;
      const std::uint32_t out = gen ? k : 1;
      std::uint32_t prev = in;
      for (int l = 0; l < spec_.layers; ++l) {
        const std::uint32_t next =
            l + 1 == spec_.layers ? out : static_cast<std::uint32_t>(spec_.hidden);
        const ParamId w = store.add(name("mlp.W" + std::to_string(l)), grp, {prev, next});
        store.add(name("mlp.b" + std::to_string(l)), grp, {next});
        init_glorot(store[w].value, prev, next, rng);
        prev = next;
      }
      break;
    }
    case Family::kCnn: {
      const std::int64_t in = gen ? 2 * k_ : 3 * k_;
      const std::uint32_t out = gen ? k : 1;
      const auto tau = static_cast<std::uint32_t>(spec_.filters);
      const auto width = static_cast<std::uint32_t>(spec_.width);
      const auto features = static_cast<std::uint32_t>(feature_map_size(in));
      const ParamId f = store.add(name("cnn.F"), grp, {tau, width});
      const ParamId w = store.add(name("cnn.W"), grp, {features, out});
      store.add(name("cnn.b"), grp, {out});
      init_glorot(store[f].value, width, tau, rng);
      init_glorot(store[w].value, features, out, rng);
      break;
    }
  }
}

void Scorer::bind(const ParamStore& store) {
  entities_ = store.id(kEntityTable);
  relations_ = store.id(kRelationTable);
  ids_.clear();
  switch (spec_.family) {
    case Family::kTransE:
      break;
    case Family::kTransH:
      ids_.push_back(store.id(name("W")));
      break;
    case Family::kTransD:
      ids_.push_back(store.id(name("Ep")));
      ids_.push_back(store.id(name("Rp")));
      break;
    case Family::kMlp:
      for (int l = 0; l < spec_.layers; ++l) {
        ids_.push_back(store.id(name("mlp.W" + std::to_string(l))));
        ids_.push_back(store.id(name("mlp.b" + std::to_string(l))));
      }
      break;
    case Family::kCnn:
      ids_.push_back(store.id(name("cnn.F")));
      ids_.push_back(store.id(name("cnn.W")));
      ids_.push_back(store.id(name("cnn.b")));
      break;
  }
  bound_ = true;
}

Var Scorer::mlp(Graph& g, Var x) const {
  for (int l = 0; l < spec_.layers; ++l) {
    x = affine(x, g.param(ids_[2 * l]), g.param(ids_[2 * l + 1]));
    if (l + 1 < spec_.layers) {
      x = spec_.activation == Activation::kRelu ? relu(x) : tanh(x);
    }
  }
  return x;
}

Var Scorer::cnn(Graph& g, Var x) const {
  return conv1d_relu_affine(x, g.param(ids_[0]), g.param(ids_[1]), g.param(ids_[2]));
}

Var Scorer::generate(Graph& g, std::span<const std::int32_t> heads,
                     std::span<const std::int32_t> rels) const {
  if (!bound_) throw std::logic_error("Scorer::bind must be called first");
  require_equal(heads.size(), rels.size(), "generate");
  Var h = entity_rows(g, heads);
  Var r = g.rows(relations_, rels);
  switch (spec_.family) {
    case Family::kTransE:
      return h + r;
    case Family::kTransH: {
      Var w = unit_rows(g.rows(ids_[0], rels));
      return h - mul_rows(w, row_dot(w, h)) + r;
    }
    case Family::kTransD: {
      Var hp = g.rows(ids_[0], heads);
      Var rp = g.rows(ids_[1], rels);
      return h + mul_rows(rp, row_dot(hp, h)) + r;
    }
    case Family::kMlp:
    case Family::kCnn:
      if (spec_.role != Role::kGenerator) {
        throw std::logic_error("a neural discriminator cannot generate tails");
      }
      return spec_.family == Family::kMlp ? mlp(g, concat_cols({h, r}))
                                          : cnn(g, concat_cols({h, r}));
  }
  throw std::logic_error("unreachable");
}

Var Scorer::score(Graph& g, std::span<const std::int32_t> heads,
                  std::span<const std::int32_t> rels, Var tails,
                  std::span<const std::int32_t> tail_ids) const {
  if (!bound_) throw std::logic_error("Scorer::bind must be called first");
  require_equal(heads.size(), rels.size(), "score");
  require_equal(heads.size(), static_cast<std::size_t>(tails.rows()), "score");
  if (!tail_ids.empty()) require_equal(heads.size(), tail_ids.size(), "score");
  Var h = entity_rows(g, heads);
  Var r = g.rows(relations_, rels);
  switch (spec_.family) {
    case Family::kTransE:
      return sq_norm_rows(h + r - tails);
    case Family::kTransH: {
      Var w = unit_rows(g.rows(ids_[0], rels));
      Var hp = h - mul_rows(w, row_dot(w, h));
      Var tp = tails - mul_rows(w, row_dot(w, tails));
      return sq_norm_rows(hp + r - tp);
    }
    case Family::kTransD: {
      Var rp = g.rows(ids_[1], rels);
      Var mh = h + mul_rows(rp, row_dot(g.rows(ids_[0], heads), h));
      Var mt = tails;
      if (!tail_ids.empty()) mt = tails + mul_rows(rp, row_dot(g.rows(ids_[0], tail_ids), tails));
      return sq_norm_rows(mh + r - mt);
    }
    case Family::kMlp:
    case Family::kCnn:
      if (spec_.role != Role::kDiscriminator) {
        throw std::logic_error("a neural generator does not score triples");
      }
      return spec_.family == Family::kMlp ? mlp(g, concat_cols({h, r, tails}))
                                          : cnn(g, concat_cols({h, r, tails}));
  }
  throw std::logic_error("unreachable");
}

Var Scorer::score_entities(Graph& g, std::span<const std::int32_t> heads,
                           std::span<const std::int32_t> rels,
                           std::span<const std::int32_t> tails) const {
  return score(g, heads, rels, entity_rows(g, tails), tails);
}

Var Scorer::entity_rows(Graph& g, std::span<const std::int32_t> ids) const {
  if (!bound_) throw std::logic_error("Scorer::bind must be called first");
  return g.rows(entities_, ids);
}

void Scorer::renormalize(ParamStore& store) const {
  if (spec_.family != Family::kTransH || !bound_) return;
  normalize_rows(store[ids_[0]].value);
}

}  // namespace kgadv

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

// Score functions f(h, r, t) and tail generators G(h, r).
//
// Every family uses the same orientation: a lower score means a more
// plausible triple. Translation families (TransE, TransH, TransD) can act
// as generator or discriminator; MLP and CNN implement whichever role their
// spec names.

#ifndef KGADV_SCORERS_H_
#define KGADV_SCORERS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgadv/autodiff.h"
#include "kgadv/common.h"
#include "kgadv/param_store.h"

namespace kgadv {

enum class Family : std::uint8_t { kTransE, kTransH, kTransD, kMlp, kCnn };
enum class Role : std::uint8_t { kGenerator, kDiscriminator };
enum class Activation : std::uint8_t { kRelu, kTanh };

std::string_view to_string(Family f);
std::string_view to_string(Role r);
std::string_view to_string(Activation a);
Family parse_family(std::string_view s);
Activation parse_activation(std::string_view s);

constexpr bool is_translation(Family f) {
  return f == Family::kTransE || f == Family::kTransH || f == Family::kTransD;
}

struct ScorerSpec {
  Family family = Family::kTransE;
  Role role = Role::kGenerator;
  int layers = 2;     // MLP affine layers
  int hidden = 100;   // MLP hidden width
  int filters = 100;  // CNN filter count
  int width = 3;      // CNN filter width
  Activation activation = Activation::kRelu;

  /// Throws std::invalid_argument for non-positive sizes.
  void validate() const;

  /// Named scalar fields ("<prefix>family", "<prefix>layers", ...) for the
  /// checkpoint; prefix is "spec.gn." or "spec.dn." by role.
  std::map<std::string, float> to_fields() const;
  static ScorerSpec from_fields(const std::map<std::string, float>& fields, Role role);

  friend bool operator==(const ScorerSpec&, const ScorerSpec&) = default;
};

/// Non-empty warning when neither side is translation-based.
std::optional<std::string> pairing_warning(const ScorerSpec& gn, const ScorerSpec& dn);

// Reference formulas over plain vectors, evaluated in double precision.

/// ||h + r - t||^2
double score_transe(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t);
/// x - (w^T x) w. Throws std::invalid_argument unless ||w|| = 1 +/- 1e-6.
std::vector<double> project_hyperplane(std::span<const double> x,
                                       std::span<const double> w);
/// ||h_perp + r - t_perp||^2 with both entities projected onto w's hyperplane.
double score_transh(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t, std::span<const double> w);

struct TransDProjectors {
  std::span<const double> head;  // h_p
  std::span<const double> rel;   // r_p
  std::span<const double> tail;  // t_p
};

/// ||M_rh h + r - M_rt t||^2 with M_rx = r_p x_p^T + I.
double score_transd(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t, const TransDProjectors& proj);

/// t'_g for the translation families. TransH needs `w`; TransD needs
/// head/rel projectors.
std::vector<double> generate_translation(Family family, std::span<const double> h,
                                         std::span<const double> r,
                                         std::span<const double> w = {},
                                         const TransDProjectors& proj = {});

/// One role's network bound to a ParamStore.
///
/// Parameter names start with "gn." (generator) or "dn." (discriminator), so
/// two translation scorers of the same family never share their relation
/// normals or projectors; only E and R are common.
class Scorer {
 public:
  Scorer(ScorerSpec spec, std::int32_t k);

  const ScorerSpec& spec() const { return spec_; }
  std::string_view prefix() const;
  Group group() const;
  /// Width of the CNN feature map for an input of `input_len` values.
  std::int64_t feature_map_size(std::int64_t input_len) const;

  /// Adds and initializes this role's parameters. E and R must exist.
  void register_params(ParamStore& store, Rng& rng) const;
  /// Resolves parameter ids. Must precede generate/score.
  void bind(const ParamStore& store);

  /// t'_g = G(h, r), B x k. Valid for translation families and for neural
  /// families in the generator role.
  Var generate(Graph& g, std::span<const std::int32_t> heads,
               std::span<const std::int32_t> rels) const;

  /// f(h, r, t), B x 1, for a tail given as vectors. `tail_ids` names the
  /// entities behind `tails`; leave it empty for generated tails, which
  /// TransD then maps with the identity.
  Var score(Graph& g, std::span<const std::int32_t> heads,
            std::span<const std::int32_t> rels, Var tails,
            std::span<const std::int32_t> tail_ids) const;

  Var score_entities(Graph& g, std::span<const std::int32_t> heads,
                     std::span<const std::int32_t> rels,
                     std::span<const std::int32_t> tails) const;

  /// The entity lookup every generate/score call goes through.
  Var entity_rows(Graph& g, std::span<const std::int32_t> ids) const;

  /// Rescales TransH normals to unit length. No-op for other families.
  void renormalize(ParamStore& store) const;

 private:
  Var mlp(Graph& g, Var x) const;
  Var cnn(Graph& g, Var x) const;
  std::string name(std::string_view leaf) const;

  ScorerSpec spec_;
  std::int32_t k_;
  ParamId entities_ = 0;
  ParamId relations_ = 0;
  std::vector<ParamId> ids_;  // family-specific parameters
  bool bound_ = false;
};

}  // namespace kgadv

#endif  // KGADV_SCORERS_H_

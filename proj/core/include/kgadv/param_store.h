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

#ifndef KGADV_PARAM_STORE_H_
#define KGADV_PARAM_STORE_H_

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgadv/common.h"

namespace kgadv {

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Ownership tag deciding which training phase updates a parameter.
enum class Group : std::uint8_t {
  kShared = 1,
  kGenerator = 2,
  kDiscriminator = 4,
};

/// Bit set of Groups.
using GroupMask = std::uint8_t;

constexpr GroupMask mask(Group g) { return static_cast<GroupMask>(g); }
constexpr GroupMask operator|(Group a, Group b) { return mask(a) | mask(b); }
constexpr GroupMask kNoGroups = 0;
constexpr GroupMask kAllGroups = 7;

std::string_view to_string(Group g);

/// Shared entity and relation tables.
inline constexpr std::string_view kEntityTable = "E";
inline constexpr std::string_view kRelationTable = "R";

struct Param {
  std::string name;
  Group group = Group::kShared;
  /// Rank 1 or 2. Rank-1 parameters are stored as a 1 x d row.
  std::vector<std::uint32_t> shape;
  MatrixF value;
};

using ParamId = std::size_t;

/// Named float arrays. Every name maps to exactly one array, so a generator
/// and a discriminator that both resolve "E" read and write the same rows.
class ParamStore {
 public:
  /// Adds a zero-filled parameter. Throws std::invalid_argument on a
  /// duplicate name or an unsupported rank.
  ParamId add(std::string name, Group group, std::vector<std::uint32_t> shape);

  std::optional<ParamId> find(std::string_view name) const;
  /// Throws std::out_of_range for unknown names.
  ParamId id(std::string_view name) const;

  Param& operator[](ParamId id) { return params_.at(id); }
  const Param& operator[](ParamId id) const { return params_.at(id); }
  Param& at(std::string_view name) { return params_[id(name)]; }
  const Param& at(std::string_view name) const { return params_[id(name)]; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Largest |value| over parameters whose group is in `groups`.
  float max_abs(GroupMask groups) const;

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, ParamId> index_;
};

/// Creates the shared tables E (n x k) and R (m x k). Entries are drawn
/// uniformly from [-6/sqrt(k), 6/sqrt(k)] and each row is then scaled to
/// unit L2 norm.
ParamStore init_embeddings(std::int32_t n, std::int32_t m, std::int32_t k, Rng& rng);

/// Fills with uniform [-6/sqrt(cols), 6/sqrt(cols)] draws and normalizes rows.
void init_unit_rows(MatrixF& table, Rng& rng);
void normalize_rows(MatrixF& table);

/// Glorot-uniform fill for a fan_in x fan_out weight.
void init_glorot(MatrixF& weight, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace kgadv

#endif  // KGADV_PARAM_STORE_H_

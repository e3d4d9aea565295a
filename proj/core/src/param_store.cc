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

#include "kgadv/param_store.h"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace kgadv {

std::string_view to_string(Group g) {
  switch (g) {
    case Group::kShared:
      return "shared";
    case Group::kGenerator:
      return "generator";
    case Group::kDiscriminator:
      return "discriminator";
  }
  return "?";
}

ParamId ParamStore::add(std::string name, Group group,
                        std::vector<std::uint32_t> shape) {
  if (shape.empty() || shape.size() > 2) {
    throw std::invalid_argument("parameter '" + name + "' must have rank 1 or 2");
  }
  if (index_.count(name)) {
    throw std::invalid_argument("duplicate parameter '" + name + "'");
  }
  const Eigen::Index rows = shape.size() == 2 ? shape[0] : 1;
  const Eigen::Index cols = shape.size() == 2 ? shape[1] : shape[0];
  const ParamId id = params_.size();
  index_.emplace(name, id);
  params_.push_back({std::move(name), group, std::move(shape), MatrixF::Zero(rows, cols)});
  return id;
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ParamId ParamStore::id(std::string_view name) const {
  auto found = find(name);
  if (!found) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  return *found;
}

float ParamStore::max_abs(GroupMask groups) const {
  float m = 0.0f;
  for (const auto& p : params_) {
    if ((mask(p.group) & groups) && p.value.size() > 0) {
      m = std::max(m, p.value.cwiseAbs().maxCoeff());
    }
  }
  return m;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    const auto& x = a.params_[i];
    const auto& y = b.params_[i];
    if (x.name != y.name || x.group != y.group || x.shape != y.shape) return false;
    if (x.value.size() != y.value.size()) return false;
    if (std::memcmp(x.value.data(), y.value.data(), sizeof(float) * x.value.size()) != 0) {
      return false;
    }
  }
  return true;
}

void normalize_rows(MatrixF& table) {
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      sq += static_cast<double>(table(i, j)) * table(i, j);
    }
    if (sq <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      table(i, j) = static_cast<float>(table(i, j) * inv);
    }
  }
}

void init_unit_rows(MatrixF& table, Rng& rng) {
  const double bound = 6.0 / std::sqrt(static_cast<double>(table.cols()));
  for (Eigen::Index i = 0; i < table.size(); ++i) {
    table.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
  }
  normalize_rows(table);
}

void init_glorot(MatrixF& weight, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index i = 0; i < weight.size(); ++i) {
    weight.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
  }
}

ParamStore init_embeddings(std::int32_t n, std::int32_t m, std::int32_t k, Rng& rng) {
  if (n < 1 || m < 1 || k < 1) {
    throw std::invalid_argument("embedding dimensions must be positive");
  }
  ParamStore store;
  const auto un = static_cast<std::uint32_t>(n);
  const auto um = static_cast<std::uint32_t>(m);
  const auto uk = static_cast<std::uint32_t>(k);
  const ParamId e = store.add(std::string(kEntityTable), Group::kShared, {un, uk});
  const ParamId r = store.add(std::string(kRelationTable), Group::kShared, {um, uk});
  init_unit_rows(store[e].value, rng);
  init_unit_rows(store[r].value, rng);
  return store;
}

}  // namespace kgadv

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

#include "kgadv/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace kgadv {
namespace {

struct Eval {
  double value;
  std::vector<std::uint8_t> pattern;
};

Eval evaluate(const LossBuilder& loss, const ParamStore& store) {
  Graph g(store);
  Var root = loss(g);
  return {root.scalar(), g.activation_pattern()};
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const LossBuilder& loss, ParamStore& store, GroupMask groups,
                           const GradCheckOptions& options) {
  const double h = std::exp2(std::round(std::log2(options.step)));
  GradMap analytic;
  std::vector<std::uint8_t> base_pattern;
  {
    Graph g(store, groups);
    Var root = loss(g);
    analytic = g.backward(root);
    base_pattern = g.activation_pattern();
  }
  GradCheckResult result;
  Rng rng(options.seed);
  for (ParamId id = 0; id < store.size(); ++id) {
    if (!analytic.has(id)) continue;
    Param& p = store[id];
    const auto count = static_cast<std::size_t>(p.value.size());
    std::vector<std::size_t> coords(count);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param && options.max_coords_per_param < count) {
      for (std::size_t i = 0; i < options.max_coords_per_param; ++i) {
        std::swap(coords[i], coords[i + rng.below(count - i)]);
      }
      coords.resize(options.max_coords_per_param);
    }
    for (std::size_t c : coords) {
      float& slot = p.value.data()[c];
      const float original = slot;
      const float plus = static_cast<float>(original + h);
      const float minus = static_cast<float>(original - h);
      slot = plus;
      const Eval up = evaluate(loss, store);
      slot = minus;
      const Eval down = evaluate(loss, store);
      slot = original;
      if (up.pattern != base_pattern || down.pattern != base_pattern) {
        ++result.kinks_excluded;
        continue;
      }
      const double numeric = (up.value - down.value) /
                             (static_cast<double>(plus) - static_cast<double>(minus));
      const double a = analytic[id].data()[c];
      const double err = relative_error(a, numeric, options.floor);
      ++result.checked;
      if (err > result.max_rel_error || result.worst_index < 0) {
        if (err >= result.max_rel_error) {
          result.max_rel_error = err;
          result.worst_param = p.name;
          result.worst_index = static_cast<std::ptrdiff_t>(c);
          result.worst_analytic = a;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace kgadv

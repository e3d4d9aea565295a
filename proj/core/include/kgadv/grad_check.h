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

#ifndef KGADV_GRAD_CHECK_H_
#define KGADV_GRAD_CHECK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "kgadv/autodiff.h"

namespace kgadv {

/// Builds a scalar loss on the given graph. Must be deterministic: the same
/// store contents must yield the same value.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckOptions {
  /// Central-difference step, rounded to the nearest power of two so that
  /// theta +/- step stays exact for moderate float values.
  double step = 1e-3;
  /// Relative errors divide by max(|analytic|, |numeric|, floor).
  double floor = 1e-6;
  /// 0 checks every coordinate; otherwise a seeded random subset per param.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +/- perturbation crossed a ReLU/hinge kink. These
  /// are nondifferentiable points and are reported instead of compared.
  std::size_t kinks_excluded = 0;
  std::string worst_param;
  std::ptrdiff_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Compares the analytic gradient of `loss` with central finite differences
/// for every parameter in `groups`. The store is perturbed in place and
/// restored bit-exactly before returning.
GradCheckResult grad_check(const LossBuilder& loss, ParamStore& store, GroupMask groups,
                           const GradCheckOptions& options = {});

}  // namespace kgadv

#endif  // KGADV_GRAD_CHECK_H_

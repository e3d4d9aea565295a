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

#ifndef KGADV_OPTIM_H_
#define KGADV_OPTIM_H_

#include <vector>

#include "kgadv/autodiff.h"
#include "kgadv/param_store.h"

namespace kgadv {

struct RmsPropOptions {
  double learning_rate = 0.001;
  double decay = 0.9;          // rho
  double epsilon = 1e-8;
  double weight_decay = 0.0;   // lambda, decoupled
};

/// RMSProp with decoupled weight decay:
///
///   s     <- rho * s + (1 - rho) * g^2
///   theta <- theta - eta * g / (sqrt(s) + eps) - eta * lambda * theta
///
/// Only parameters present in the GradMap are touched. Running means are
/// kept per parameter and start at zero.
class RmsProp {
 public:
  explicit RmsProp(RmsPropOptions options = {}) : options_(options) {}

  /// Throws NumericError, leaving the store untouched, if any gradient entry
  /// is NaN or infinite.
  void step(ParamStore& store, const GradMap& grads);

  const RmsPropOptions& options() const { return options_; }
  /// Running mean of squared gradients for `id`; empty until first update.
  const MatrixF& mean_square(ParamId id) const;

 private:
  RmsPropOptions options_;
  std::vector<MatrixF> mean_sq_;
};

/// Clamps every value of every parameter in `groups` into [-c, c].
void clip_weights(ParamStore& store, GroupMask groups, float c);

}  // namespace kgadv

#endif  // KGADV_OPTIM_H_

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

#include "kgadv/optim.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kgadv {

void RmsProp::step(ParamStore& store, const GradMap& grads) {
  for (ParamId id = 0; id < store.size(); ++id) {
    if (!grads.has(id)) continue;
    const MatrixD& g = grads[id];
    if (g.rows() != store[id].value.rows() || g.cols() != store[id].value.cols()) {
      throw ShapeError("gradient for '" + store[id].name + "' does not match its shape");
    }
    if (!g.allFinite()) {
      throw NumericError("non-finite gradient for parameter '" + store[id].name + "'");
    }
  }
  if (mean_sq_.size() < store.size()) mean_sq_.resize(store.size());
  const double rho = options_.decay;
  const double eta = options_.learning_rate;
  const double eps = options_.epsilon;
  const double lambda = options_.weight_decay;
  for (ParamId id = 0; id < store.size(); ++id) {
    if (!grads.has(id)) continue;
    MatrixF& theta = store[id].value;
    MatrixF& s = mean_sq_[id];
    if (s.size() == 0) s = MatrixF::Zero(theta.rows(), theta.cols());
    const double* gd = grads[id].data();
    float* td = theta.data();
    float* sd = s.data();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double si = rho * sd[i] + (1.0 - rho) * gd[i] * gd[i];
      const double ti = td[i];
      sd[i] = static_cast<float>(si);
      td[i] = static_cast<float>(ti - eta * gd[i] / (std::sqrt(si) + eps) - eta * lambda * ti);
    }
  }
}

const MatrixF& RmsProp::mean_square(ParamId id) const {
  static const MatrixF kEmpty;
  return id < mean_sq_.size() ? mean_sq_[id] : kEmpty;
}

void clip_weights(ParamStore& store, GroupMask groups, float c) {
  if (!(c > 0.0f)) throw std::invalid_argument("clip threshold must be positive");
  for (auto& p : store) {
    if (mask(p.group) & groups) p.value = p.value.cwiseMax(-c).cwiseMin(c);
  }
}

}  // namespace kgadv

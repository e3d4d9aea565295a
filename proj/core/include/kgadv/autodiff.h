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

// Batched reverse-mode differentiation over row-major matrices.
//
// A Graph records one forward pass. Values are held in double precision;
// parameters are read from a float ParamStore and their gradients come back
// as a GradMap aligned with the store. Rows of a batch are independent
// instances, so most ops map B x k inputs to B x k or B x 1 outputs.
//
//   Graph g(store, Group::kShared | Group::kDiscriminator);
//   Var h = g.rows(e_id, heads);
//   Var loss = sum(sq_norm_rows(h));
//   GradMap grads = g.backward(loss);

#ifndef KGADV_AUTODIFF_H_
#define KGADV_AUTODIFF_H_

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgadv/param_store.h"

namespace kgadv {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the Graph lives.
class Var {
 public:
  Var() = default;

  const MatrixD& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1 x 1 node.
  double scalar() const;
  Graph* graph() const { return graph_; }
  std::int32_t index() const { return index_; }

 private:
  friend class Graph;
  Var(Graph* g, std::int32_t i) : graph_(g), index_(i) {}
  Graph* graph_ = nullptr;
  std::int32_t index_ = -1;
};

/// Gradients indexed by ParamId. Frozen parameters have an empty matrix;
/// trainable parameters the loss never reached have an all-zero one.
struct GradMap {
  std::vector<MatrixD> grads;

  bool has(ParamId id) const { return id < grads.size() && grads[id].size() > 0; }
  const MatrixD& operator[](ParamId id) const { return grads.at(id); }
};

class Graph {
 public:
  /// Parameters whose group is in `trainable` receive gradients; all others
  /// behave as constants.
  explicit Graph(const ParamStore& store, GroupMask trainable = kNoGroups);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  const ParamStore& store() const { return store_; }
  bool trainable(ParamId id) const;

  Var constant(MatrixD value);
  Var scalar(double v);
  /// The whole parameter as one leaf. Repeated calls return the same node.
  Var param(ParamId id);
  /// Selected rows of a rank-2 parameter, B x cols.
  Var rows(ParamId id, std::span<const std::int32_t> index);

  /// Reverse sweep from a 1 x 1 root. Throws ShapeError otherwise.
  GradMap backward(Var root);

  /// One byte per ReLU element evaluated so far (1 if the input was > 0).
  /// Two passes with equal patterns took the same linear pieces.
  const std::vector<std::uint8_t>& activation_pattern() const { return pattern_; }

  std::size_t num_nodes() const { return nodes_.size(); }

  // Node construction, used by the op functions below.
  using Backward = std::function<void(Graph&, const MatrixD& grad)>;
  Var emit(MatrixD value, std::span<const Var> parents, Backward backward);
  Var emit(MatrixD value, std::initializer_list<Var> parents, Backward backward) {
    return emit(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
  }
  bool needs_grad(Var v) const { return nodes_.at(v.index_).needs_grad; }
  /// Adds `delta` into the gradient of `v` if it needs one.
  void accumulate(Var v, const MatrixD& delta);
  void record_pattern(const MatrixD& pre_activation);
  const MatrixD& value_of(std::int32_t i) const { return nodes_.at(i).value; }
  void check_owner(Var v) const;

 private:
  struct Node {
    MatrixD value;
    MatrixD grad;
    bool needs_grad = false;
    Backward backward;
  };

  MatrixD& param_grad(ParamId id);

  const ParamStore& store_;
  GroupMask trainable_;
  std::vector<Node> nodes_;
  std::unordered_map<ParamId, std::int32_t> param_nodes_;
  std::vector<MatrixD> param_grads_;
  std::vector<std::uint8_t> pattern_;
};

// Elementwise and structural ops. Operands must come from the same Graph;
// incompatible shapes throw ShapeError.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
/// out[i, :] = a[i, :] * col[i]; col is B x 1.
Var mul_rows(Var a, Var col);
/// Per-row inner product, B x 1.
Var row_dot(Var a, Var b);
/// Per-row squared L2 norm, B x 1.
Var sq_norm_rows(Var a);
/// Per-row L2 norm, B x 1. Subgradient 0 at the origin.
Var norm_rows(Var a);
/// Each row scaled to unit L2 norm; zero rows stay zero.
Var unit_rows(Var a);
/// x W + b with x: B x in, W: in x out, b: 1 x out.
Var affine(Var x, Var w, Var b);
Var relu(Var a);
Var tanh(Var a);
/// Column-wise concatenation of equal-height operands.
Var concat_cols(std::initializer_list<Var> parts);
/// Valid 1-D convolution, stride 1, of each row of x (B x L) with each row of
/// filters (tau x w). Output is B x (tau * (L - w + 1)), filter-major.
Var conv1d(Var x, Var filters);
/// affine(relu(conv1d(x, filters)), w, b) without holding the whole feature
/// map. Rows are processed in small blocks and recomputed on the way back.
Var conv1d_relu_affine(Var x, Var filters, Var w, Var b);
/// Sum of all entries, 1 x 1.
Var sum(Var a);
/// Same value, no gradient flow.
Var detach(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace kgadv

#endif  // KGADV_AUTODIFF_H_

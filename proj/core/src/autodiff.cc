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

#include "kgadv/autodiff.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace kgadv {
namespace {

std::string shape_str(const MatrixD& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.value()) +
                     " vs " + shape_str(b.value()));
  }
}

Graph& owner(Var a, Var b) {
  a.graph()->check_owner(b);
  return *a.graph();
}

}  // namespace

const MatrixD& Var::value() const {
  if (graph_ == nullptr) throw std::logic_error("empty Var");
  return graph_->value_of(index_);
}

double Var::scalar() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("scalar(): node is " + shape_str(v));
  }
  return v(0, 0);
}

Graph::Graph(const ParamStore& store, GroupMask trainable)
    : store_(store), trainable_(trainable), param_grads_(store.size()) {}

bool Graph::trainable(ParamId id) const {
  return (mask(store_[id].group) & trainable_) != 0;
}

void Graph::check_owner(Var v) const {
  if (v.graph_ != this) throw std::logic_error("Var belongs to another Graph");
}

Var Graph::emit(MatrixD value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (Var p : parents) {
    check_owner(p);
    needs = needs || nodes_[p.index_].needs_grad;
  }
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs;
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

void Graph::accumulate(Var v, const MatrixD& delta) {
  Node& n = nodes_.at(v.index_);
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = delta;
  } else {
    n.grad += delta;
  }
}

void Graph::record_pattern(const MatrixD& pre) {
  const auto* d = pre.data();
  const std::size_t at = pattern_.size();
  pattern_.resize(at + static_cast<std::size_t>(pre.size()));
  for (Eigen::Index i = 0; i < pre.size(); ++i) pattern_[at + i] = d[i] > 0.0;
}

MatrixD& Graph::param_grad(ParamId id) {
  MatrixD& g = param_grads_.at(id);
  if (g.size() == 0) {
    const auto& v = store_[id].value;
    g = MatrixD::Zero(v.rows(), v.cols());
  }
  return g;
}

Var Graph::constant(MatrixD value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

Var Graph::scalar(double v) {
  MatrixD m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Graph::param(ParamId id) {
  if (auto it = param_nodes_.find(id); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node node;
  node.value = store_[id].value.cast<double>();
  node.needs_grad = trainable(id);
  if (node.needs_grad) {
    node.backward = [id](Graph& g, const MatrixD& grad) { g.param_grad(id) += grad; };
  }
  nodes_.push_back(std::move(node));
  const auto idx = static_cast<std::int32_t>(nodes_.size() - 1);
  param_nodes_.emplace(id, idx);
  return Var(this, idx);
}

Var Graph::rows(ParamId id, std::span<const std::int32_t> index) {
  const MatrixF& table = store_[id].value;
  const auto b = static_cast<Eigen::Index>(index.size());
  MatrixD out(b, table.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto r = index[static_cast<std::size_t>(i)];
    if (r < 0 || r >= table.rows()) {
      throw ShapeError("rows(): index " + std::to_string(r) + " out of range for '" +
                       store_[id].name + "'");
    }
    out.row(i) = table.row(r).cast<double>();
  }
  Node node;
  node.value = std::move(out);
  node.needs_grad = trainable(id);
  if (node.needs_grad) {
    std::vector<std::int32_t> idx(index.begin(), index.end());
    node.backward = [id, idx = std::move(idx)](Graph& g, const MatrixD& grad) {
      MatrixD& pg = g.param_grad(id);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        pg.row(idx[i]) += grad.row(static_cast<Eigen::Index>(i));
      }
    };
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

GradMap Graph::backward(Var root) {
  check_owner(root);
  const MatrixD& rv = root.value();
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ShapeError("backward(): root must be 1x1, got " + shape_str(rv));
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  for (auto& g : param_grads_) g.resize(0, 0);
  if (nodes_[root.index_].needs_grad) {
    nodes_[root.index_].grad = MatrixD::Ones(1, 1);
    for (std::int32_t i = root.index_; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }
  GradMap out;
  out.grads.resize(store_.size());
  for (ParamId id = 0; id < store_.size(); ++id) {
    if (!trainable(id)) continue;
    out.grads[id] = param_grads_[id].size() ? std::move(param_grads_[id])
                                            : MatrixD::Zero(store_[id].value.rows(),
                                                            store_[id].value.cols());
  }
  return out;
}

// --- ops -------------------------------------------------------------------

Var add(Var a, Var b) {
  Graph& g = owner(a, b);
  require_same_shape("add", a, b);
  return g.emit(a.value() + b.value(), {a, b}, [a, b](Graph& g, const MatrixD& d) {
    g.accumulate(a, d);
    g.accumulate(b, d);
  });
}

Var sub(Var a, Var b) {
  Graph& g = owner(a, b);
  require_same_shape("sub", a, b);
  return g.emit(a.value() - b.value(), {a, b}, [a, b](Graph& g, const MatrixD& d) {
    g.accumulate(a, d);
    g.accumulate(b, -d);
  });
}

Var scale(Var a, double s) {
  Graph& g = *a.graph();
  return g.emit(a.value() * s, {a},
                [a, s](Graph& g, const MatrixD& d) { g.accumulate(a, d * s); });
}

Var mul_rows(Var a, Var col) {
  Graph& g = owner(a, col);
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw ShapeError("mul_rows: expected " + std::to_string(a.rows()) +
                     "x1 column, got " + shape_str(col.value()));
  }
  MatrixD out = a.value().array().colwise() * col.value().col(0).array();
  return g.emit(std::move(out), {a, col}, [a, col](Graph& g, const MatrixD& d) {
    if (g.needs_grad(a)) {
      MatrixD da = d.array().colwise() * col.value().col(0).array();
      g.accumulate(a, da);
    }
    if (g.needs_grad(col)) {
      MatrixD dc = (d.array() * a.value().array()).rowwise().sum();
      g.accumulate(col, dc);
    }
  });
}

Var row_dot(Var a, Var b) {
  Graph& g = owner(a, b);
  require_same_shape("row_dot", a, b);
  MatrixD out = (a.value().array() * b.value().array()).rowwise().sum();
  return g.emit(std::move(out), {a, b}, [a, b](Graph& g, const MatrixD& d) {
    if (g.needs_grad(a)) {
      MatrixD da = b.value().array().colwise() * d.col(0).array();
      g.accumulate(a, da);
    }
    if (g.needs_grad(b)) {
      MatrixD db = a.value().array().colwise() * d.col(0).array();
      g.accumulate(b, db);
    }
  });
}

Var sq_norm_rows(Var a) {
  Graph& g = *a.graph();
  MatrixD out = a.value().rowwise().squaredNorm();
  return g.emit(std::move(out), {a}, [a](Graph& g, const MatrixD& d) {
    MatrixD da = 2.0 * (a.value().array().colwise() * d.col(0).array());
    g.accumulate(a, da);
  });
}

Var norm_rows(Var a) {
  Graph& g = *a.graph();
  MatrixD out = a.value().rowwise().norm();
  return g.emit(out, {a}, [a, out](Graph& g, const MatrixD& d) {
    MatrixD da = MatrixD::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (out(i, 0) > 0.0) da.row(i) = a.value().row(i) * (d(i, 0) / out(i, 0));
    }
    g.accumulate(a, da);
  });
}

Var unit_rows(Var a) {
  Graph& g = *a.graph();
  const MatrixD norms = a.value().rowwise().norm();
  MatrixD out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (norms(i, 0) > 0.0) out.row(i) /= norms(i, 0);
  }
  return g.emit(out, {a}, [a, out, norms](Graph& g, const MatrixD& d) {
    // d(a/|a|) = (d - y (y . d)) / |a|
    MatrixD da = MatrixD::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (norms(i, 0) <= 0.0) continue;
      const double yd = out.row(i).dot(d.row(i));
      da.row(i) = (d.row(i) - out.row(i) * yd) / norms(i, 0);
    }
    g.accumulate(a, da);
  });
}

Var affine(Var x, Var w, Var b) {
  Graph& g = owner(x, w);
  g.check_owner(b);
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeError("affine: x " + shape_str(x.value()) + ", W " + shape_str(w.value()) +
                     ", b " + shape_str(b.value()));
  }
  MatrixD out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return g.emit(std::move(out), {x, w, b}, [x, w, b](Graph& g, const MatrixD& d) {
    if (g.needs_grad(x)) g.accumulate(x, d * w.value().transpose());
    if (g.needs_grad(w)) g.accumulate(w, x.value().transpose() * d);
    if (g.needs_grad(b)) g.accumulate(b, d.colwise().sum());
  });
}

Var relu(Var a) {
  Graph& g = *a.graph();
  g.record_pattern(a.value());
  MatrixD out = a.value().cwiseMax(0.0);
  return g.emit(std::move(out), {a}, [a](Graph& g, const MatrixD& d) {
    // Subgradient 0 at the kink.
    MatrixD da = (a.value().array() > 0.0).select(d, 0.0);
    g.accumulate(a, da);
  });
}

Var tanh(Var a) {
  Graph& g = *a.graph();
  MatrixD out = a.value().array().tanh();
  return g.emit(out, {a}, [a, out](Graph& g, const MatrixD& d) {
    MatrixD da = d.array() * (1.0 - out.array().square());
    g.accumulate(a, da);
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  if (parts.size() == 0) throw ShapeError("concat_cols: no operands");
  Var first = *parts.begin();
  Graph& g = *first.graph();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    g.check_owner(p);
    if (p.rows() != first.rows()) throw ShapeError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  MatrixD out(first.rows(), cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> ps(parts);
  return g.emit(std::move(out), ps, [ps](Graph& g, const MatrixD& d) {
    Eigen::Index at = 0;
    for (Var p : ps) {
      if (g.needs_grad(p)) g.accumulate(p, d.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
}

Var conv1d(Var x, Var filters) {
  Graph& g = owner(x, filters);
  const Eigen::Index len = x.cols();
  const Eigen::Index width = filters.cols();
  const Eigen::Index tau = filters.rows();
  if (width > len || width < 1) {
    throw ShapeError("conv1d: filter width " + std::to_string(width) +
                     " exceeds input length " + std::to_string(len));
  }
  const Eigen::Index positions = len - width + 1;
  using Patches = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                 Eigen::RowMajor>,
                             0, Eigen::Stride<1, 1>>;
  MatrixD out(x.rows(), tau * positions);
  const MatrixD& xv = x.value();
  const MatrixD& fv = filters.value();
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    // patches(p, j) = x[b, p + j]
    Patches patches(xv.data() + b * len, positions, width);
    MatrixD fm = fv * patches.transpose();  // tau x positions
    out.row(b) = Eigen::Map<const Eigen::RowVectorXd>(fm.data(), tau * positions);
  }
  return g.emit(std::move(out), {x, filters},
                [x, filters, len, width, tau, positions](Graph& g, const MatrixD& d) {
                  const MatrixD& xv = x.value();
                  const MatrixD& fv = filters.value();
                  MatrixD dx = MatrixD::Zero(x.rows(), len);
                  MatrixD df = MatrixD::Zero(tau, width);
                  const bool need_x = g.needs_grad(x);
                  const bool need_f = g.needs_grad(filters);
                  for (Eigen::Index b = 0; b < x.rows(); ++b) {
                    Eigen::Map<const MatrixD> dfm(d.data() + b * tau * positions, tau,
                                                  positions);
                    Patches patches(xv.data() + b * len, positions, width);
                    if (need_f) df.noalias() += dfm * patches;
                    if (need_x) {
                      MatrixD dp = dfm.transpose() * fv;  // positions x width
                      for (Eigen::Index p = 0; p < positions; ++p) {
                        dx.row(b).segment(p, width) += dp.row(p);
                      }
                    }
                  }
                  if (need_x) g.accumulate(x, dx);
                  if (need_f) g.accumulate(filters, df);
                });
}

namespace {


// im2col for rows [begin, begin + count): patches(i * P + p, j) = x[begin + i, p + j].
void patch_block(const MatrixD& xv, Eigen::Index begin, Eigen::Index count,
                 Eigen::Index positions, Eigen::Index width, MatrixD& patches) {
  patches.resize(count * positions, width);
  for (Eigen::Index i = 0; i < count; ++i) {
    const double* src = xv.row(begin + i).data();
    for (Eigen::Index p = 0; p < positions; ++p) {
      for (Eigen::Index j = 0; j < width; ++j) patches(i * positions + p, j) = src[p + j];
    }
  }
}

// W rows reordered from filter-major (f * P + p) to position-major (p * tau + f),
// which is how a block of patch products lays out in memory.
MatrixD to_position_major(const MatrixD& w, Eigen::Index tau, Eigen::Index positions) {
  MatrixD out(w.rows(), w.cols());
  for (Eigen::Index f = 0; f < tau; ++f) {
    for (Eigen::Index p = 0; p < positions; ++p) out.row(p * tau + f) = w.row(f * positions + p);
  }
  return out;
}

constexpr Eigen::Index kConvBlock = 64;

}  // namespace

Var conv1d_relu_affine(Var x, Var filters, Var w, Var b) {
  Graph& g = owner(x, filters);
  owner(x, w);
  owner(x, b);
  const Eigen::Index len = x.cols();
  const Eigen::Index width = filters.cols();
  const Eigen::Index tau = filters.rows();
  if (width > len || width < 1) {
    throw ShapeError("conv1d: filter width " + std::to_string(width) +
                     " exceeds input length " + std::to_string(len));
  }
  const Eigen::Index positions = len - width + 1;
  if (w.rows() != tau * positions || b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeError("conv1d_relu_affine: weights " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + " do not fit " +
                     std::to_string(tau * positions) + " features");
  }
  const Eigen::Index rows = x.rows();
  const Eigen::Index features = tau * positions;
  const MatrixD wp = to_position_major(w.value(), tau, positions);
  MatrixD out(rows, w.cols());
  MatrixD patches;
  MatrixD pre;
  for (Eigen::Index at = 0; at < rows; at += kConvBlock) {
    const Eigen::Index n = std::min(kConvBlock, rows - at);
    patch_block(x.value(), at, n, positions, width, patches);
    pre.noalias() = patches * filters.value().transpose();  // (n * P) x tau
    g.record_pattern(pre);
    pre = pre.cwiseMax(0.0);
    Eigen::Map<const MatrixD> flat(pre.data(), n, features);
    out.middleRows(at, n).noalias() = flat * wp;
  }
  out.rowwise() += b.value().row(0);
  return g.emit(
      std::move(out), {x, filters, w, b},
      [x, filters, w, b, len, width, tau, positions](Graph& g, const MatrixD& d) {
        const bool need_x = g.needs_grad(x);
        const bool need_f = g.needs_grad(filters);
        const bool need_w = g.needs_grad(w);
        if (g.needs_grad(b)) g.accumulate(b, d.colwise().sum());
        if (!need_x && !need_f && !need_w) return;
        const Eigen::Index features = tau * positions;
        const MatrixD& xv = x.value();
        const MatrixD& fv = filters.value();
        const MatrixD wp = to_position_major(w.value(), tau, positions);
        MatrixD dx = need_x ? MatrixD::Zero(x.rows(), len) : MatrixD();
        MatrixD df = need_f ? MatrixD::Zero(tau, width) : MatrixD();
        MatrixD dwp = need_w ? MatrixD::Zero(features, w.cols()) : MatrixD();
        MatrixD patches;
        MatrixD pre;
        MatrixD dz;
        MatrixD dpatch;
        for (Eigen::Index at = 0; at < x.rows(); at += kConvBlock) {
          const Eigen::Index n = std::min(kConvBlock, x.rows() - at);
          const auto dblock = d.middleRows(at, n);
          patch_block(xv, at, n, positions, width, patches);
          pre.noalias() = patches * fv.transpose();
          Eigen::Map<const MatrixD> flat_pre(pre.data(), n, features);
          if (need_w) dwp.noalias() += flat_pre.cwiseMax(0.0).transpose() * dblock;
          if (!need_x && !need_f) continue;
          dz.resize(n * positions, tau);
          Eigen::Map<MatrixD> flat_dz(dz.data(), n, features);
          flat_dz.noalias() = dblock * wp.transpose();
          dz = (pre.array() > 0.0).select(dz, 0.0);
          if (need_f) df.noalias() += dz.transpose() * patches;
          if (need_x) {
            dpatch.noalias() = dz * fv;  // (n * P) x width
            for (Eigen::Index i = 0; i < n; ++i) {
              double* dst = dx.row(at + i).data();
              for (Eigen::Index p = 0; p < positions; ++p) {
                for (Eigen::Index j = 0; j < width; ++j) {
                  dst[p + j] += dpatch(i * positions + p, j);
                }
              }
            }
          }
        }
        if (need_x) g.accumulate(x, dx);
        if (need_f) g.accumulate(filters, df);
        if (need_w) {
          MatrixD dw(features, w.cols());
          for (Eigen::Index f = 0; f < tau; ++f) {
            for (Eigen::Index p = 0; p < positions; ++p) {
              dw.row(f * positions + p) = dwp.row(p * tau + f);
            }
          }
          g.accumulate(w, dw);
        }
      });
}

Var sum(Var a) {
  Graph& g = *a.graph();
  MatrixD out(1, 1);
  out(0, 0) = a.value().sum();
  return g.emit(std::move(out), {a}, [a](Graph& g, const MatrixD& d) {
    g.accumulate(a, MatrixD::Constant(a.rows(), a.cols(), d(0, 0)));
  });
}

Var detach(Var a) { return a.graph()->constant(a.value()); }

}  // namespace kgadv

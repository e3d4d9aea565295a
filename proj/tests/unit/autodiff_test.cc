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

#include <gtest/gtest.h>

#include <functional>
#include <string>

#include "kgadv/grad_check.h"

namespace kgadv {
namespace {

MatrixD row(std::initializer_list<double> v) {
  MatrixD m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index j = 0;
  for (double x : v) m(0, j++) = x;
  return m;
}

ParamStore store_with(std::initializer_list<std::pair<const char*, std::vector<std::uint32_t>>> shapes,
                      Rng& rng, double lo = -1.0, double hi = 1.0) {
  ParamStore s;
  for (const auto& [name, shape] : shapes) {
    ParamId id = s.add(name, Group::kShared, shape);
    for (float& v : s[id].value.reshaped()) v = static_cast<float>(rng.uniform(lo, hi));
  }
  return s;
}

// --- forward values --------------------------------------------------------------

TEST(Ops, SquaredNorm) {
  ParamStore s;
  Graph g(s);
  EXPECT_DOUBLE_EQ(sq_norm_rows(g.constant(row({3, 4}))).scalar(), 25.0);
  EXPECT_DOUBLE_EQ(norm_rows(g.constant(row({3, 4}))).scalar(), 5.0);
}

TEST(Ops, Relu) {
  ParamStore s;
  Graph g(s);
  MatrixD out = relu(g.constant(row({-1, 2}))).value();
  EXPECT_EQ(out, row({0, 2}));
}

TEST(Ops, ConvWithFilterEqualToInput) {
  ParamStore s;
  Graph g(s);
  MatrixD x = row({1, -2, 3, 0.5});
  Var out = conv1d(g.constant(x), g.constant(x));
  ASSERT_EQ(out.cols(), 1);
  EXPECT_DOUBLE_EQ(out.scalar(), x.squaredNorm());
}

TEST(Ops, ConvShapeAndLayout) {
  ParamStore s;
  Graph g(s);
  MatrixD x = row({1, 2, 3, 4, 5});
  MatrixD f(2, 2);
  f << 1, 0,   // picks x[i]
      0, 1;    // picks x[i + 1]
  MatrixD out = conv1d(g.constant(x), g.constant(f)).value();
  EXPECT_EQ(out, row({1, 2, 3, 4, 2, 3, 4, 5}));
}

TEST(Ops, ConvWidthLongerThanInputRejected) {
  ParamStore s;
  Graph g(s);
  EXPECT_THROW(conv1d(g.constant(row({1, 2})), g.constant(row({1, 2, 3}))), ShapeError);
}

// The fused op against the three-op composition, across block boundaries.
TEST(Ops, FusedConvMatchesComposition) {
  Rng rng(11);
  using S = std::vector<std::uint32_t>;
  ParamStore s =
      store_with({{"x", S{150, 10}}, {"f", S{4, 3}}, {"w", S{32, 2}}, {"b", S{2}}}, rng);
  const ParamId x = 0, f = 1, w = 2, b = 3;
  MatrixD ref_value;
  GradMap ref;
  {
    Graph g(s, kAllGroups);
    Var out = affine(relu(conv1d(g.param(x), g.param(f))), g.param(w), g.param(b));
    ref_value = out.value();
    ref = g.backward(sum(scale(out, 0.5) + out));
  }
  Graph g(s, kAllGroups);
  Var out = conv1d_relu_affine(g.param(x), g.param(f), g.param(w), g.param(b));
  EXPECT_LE((out.value() - ref_value).cwiseAbs().maxCoeff(), 1e-12);
  GradMap got = g.backward(sum(scale(out, 0.5) + out));
  for (ParamId id : {x, f, w, b}) {
    EXPECT_LE((got[id] - ref[id]).cwiseAbs().maxCoeff(), 1e-12) << s[id].name;
  }
  EXPECT_EQ(g.activation_pattern().size(), 150u * 32u);
}

TEST(Ops, FusedConvRejectsWrongWeightHeight) {
  ParamStore s;
  Graph g(s);
  EXPECT_THROW(conv1d_relu_affine(g.constant(row({1, 2, 3})), g.constant(row({1, 2})),
                                  g.constant(MatrixD::Zero(3, 1)), g.constant(row({0}))),
               ShapeError);
}

TEST(Ops, ShapeMismatchRejected) {
  ParamStore s;
  Graph g(s);
  EXPECT_THROW(add(g.constant(row({1, 2})), g.constant(row({1, 2, 3}))), ShapeError);
  EXPECT_THROW(affine(g.constant(row({1, 2})), g.constant(MatrixD::Zero(3, 1)),
                      g.constant(MatrixD::Zero(1, 1))),
               ShapeError);
}

TEST(Ops, AffineAndConcat) {
  ParamStore s;
  Graph g(s);
  MatrixD w(3, 2);
  w << 1, 0, 0, 1, 1, 1;
  Var x = concat_cols({g.constant(row({1, 2})), g.constant(row({3}))});
  EXPECT_EQ(x.value(), row({1, 2, 3}));
  EXPECT_EQ(affine(x, g.constant(w), g.constant(row({10, 20}))).value(), row({14, 25}));
}

TEST(Ops, UnitRowsHandlesZeroRow) {
  ParamStore s;
  Graph g(s);
  MatrixD m(2, 2);
  m << 3, 4, 0, 0;
  MatrixD out = unit_rows(g.constant(m)).value();
  EXPECT_DOUBLE_EQ(out(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.8);
  EXPECT_EQ(out(1, 0), 0.0);
}

// --- backward --------------------------------------------------------------------

TEST(Backward, SquaredNormGradient) {
  ParamStore s;
  ParamId id = s.add("x", Group::kShared, {2});
  s[id].value << 3.0f, 4.0f;
  Graph g(s, kAllGroups);
  GradMap grads = g.backward(sum(sq_norm_rows(g.param(id))));
  EXPECT_EQ(grads[id], row({6, 8}));
}

TEST(Backward, ConstantRootGivesZeroGradients) {
  ParamStore s;
  ParamId id = s.add("x", Group::kShared, {3});
  s[id].value.setOnes();
  Graph g(s, kAllGroups);
  GradMap grads = g.backward(g.scalar(2.0));
  ASSERT_TRUE(grads.has(id));
  EXPECT_TRUE(grads[id].isZero());
}

TEST(Backward, NonScalarRootRejected) {
  ParamStore s;
  ParamId id = s.add("x", Group::kShared, {3});
  Graph g(s, kAllGroups);
  EXPECT_THROW(g.backward(g.param(id)), ShapeError);
}

TEST(Backward, RowGatherScatterAdds) {
  ParamStore s;
  ParamId id = s.add("E", Group::kShared, {3, 2});
  s[id].value << 1, 2, 3, 4, 5, 6;
  Graph g(s, kAllGroups);
  std::vector<std::int32_t> idx{2, 0, 2};
  GradMap grads = g.backward(sum(g.rows(id, idx)));
  MatrixD expected(3, 2);
  expected << 1, 1, 0, 0, 2, 2;
  EXPECT_EQ(grads[id], expected);
}

TEST(Backward, ParamUsedTwiceAccumulates) {
  ParamStore s;
  ParamId id = s.add("x", Group::kShared, {1});
  s[id].value(0, 0) = 2.0f;
  Graph g(s, kAllGroups);
  Var x = g.param(id);
  GradMap grads = g.backward(sum(mul_rows(x, x)) + sum(x));
  EXPECT_DOUBLE_EQ(grads[id](0, 0), 5.0);
}

TEST(Backward, FrozenGroupsGetNoGradient) {
  ParamStore s;
  ParamId a = s.add("gn.a", Group::kGenerator, {2});
  ParamId b = s.add("dn.b", Group::kDiscriminator, {2});
  Graph g(s, mask(Group::kDiscriminator));
  GradMap grads = g.backward(sum(g.param(a) + g.param(b)));
  EXPECT_FALSE(grads.has(a));
  EXPECT_TRUE(grads.has(b));
}

TEST(Backward, DetachBlocksFlow) {
  ParamStore s;
  ParamId id = s.add("x", Group::kShared, {2});
  s[id].value.setConstant(1.0f);
  Graph g(s, kAllGroups);
  GradMap grads = g.backward(sum(sq_norm_rows(detach(g.param(id)))));
  EXPECT_TRUE(grads[id].isZero());
}

// --- finite-difference property over every op -------------------------------------

struct OpCase {
  std::string name;
  std::function<ParamStore(Rng&)> make;
  std::function<Var(Graph&)> op;
};

// Each op's output is reduced through a fixed random projection, so the
// finite-difference check sees that op's curvature and nothing else.
std::vector<OpCase> op_cases() {
  using S = std::vector<std::uint32_t>;
  auto two = [](Rng& r) { return store_with({{"a", S{3, 4}}, {"b", S{3, 4}}}, r); };
  std::vector<OpCase> cases;
  cases.push_back({"add", two, [](Graph& g) { return g.param(0) + g.param(1); }});
  cases.push_back({"sub", two, [](Graph& g) { return g.param(0) - g.param(1); }});
  cases.push_back({"scale", two, [](Graph& g) { return scale(g.param(0), -1.7); }});
  cases.push_back({"row_dot", two, [](Graph& g) { return row_dot(g.param(0), g.param(1)); }});
  cases.push_back({"mul_rows",
                   [](Rng& r) { return store_with({{"a", S{3, 4}}, {"c", S{3, 1}}}, r); },
                   [](Graph& g) { return mul_rows(g.param(0), g.param(1)); }});
  cases.push_back({"sq_norm_rows", two, [](Graph& g) { return sq_norm_rows(g.param(0)); }});
  cases.push_back({"norm_rows",
                   [](Rng& r) { return store_with({{"a", S{3, 4}}}, r, 0.5, 1.5); },
                   [](Graph& g) { return norm_rows(g.param(0)); }});
  cases.push_back({"unit_rows",
                   [](Rng& r) { return store_with({{"a", S{3, 4}}}, r, 0.5, 1.5); },
                   [](Graph& g) { return unit_rows(g.param(0)); }});
  cases.push_back({"affine",
                   [](Rng& r) {
                     return store_with({{"x", S{3, 4}}, {"w", S{4, 2}}, {"b", S{2}}}, r);
                   },
                   [](Graph& g) { return affine(g.param(0), g.param(1), g.param(2)); }});
  cases.push_back({"relu", two, [](Graph& g) { return relu(g.param(0)); }});
  cases.push_back({"tanh", two, [](Graph& g) { return tanh(g.param(0)); }});
  cases.push_back({"concat", two, [](Graph& g) {
                     return concat_cols({g.param(0), g.param(1), g.param(0)});
                   }});
  cases.push_back({"conv1d",
                   [](Rng& r) { return store_with({{"x", S{3, 8}}, {"f", S{2, 3}}}, r); },
                   [](Graph& g) { return conv1d(g.param(0), g.param(1)); }});
  cases.push_back({"conv1d_relu_affine",
                   [](Rng& r) {
                     return store_with(
                         {{"x", S{3, 8}}, {"f", S{2, 3}}, {"w", S{12, 2}}, {"b", S{2}}}, r);
                   },
                   [](Graph& g) {
                     return conv1d_relu_affine(g.param(0), g.param(1), g.param(2), g.param(3));
                   }});
  cases.push_back({"rows",
                   [](Rng& r) { return store_with({{"E", S{5, 3}}}, r); },
                   [](Graph& g) {
                     std::vector<std::int32_t> idx{4, 1, 1, 0};
                     return g.rows(0, idx);
                   }});
  cases.push_back({"composite_transe", two, [](Graph& g) {
                     return sq_norm_rows(g.param(0) + g.param(1) - scale(g.param(0), 0.3));
                   }});
  return cases;
}

TEST(GradientProperty, EveryOpMatchesFiniteDifferences) {
  for (const OpCase& c : op_cases()) {
    double worst = 0.0;
    std::size_t checked = 0;
    for (int draw = 0; draw < 100; ++draw) {
      Rng rng = Rng::derive(0x0ab5, static_cast<std::uint64_t>(draw));
      ParamStore s = c.make(rng);
      MatrixD proj;
      LossBuilder loss = [&](Graph& g) {
        Var out = c.op(g);
        if (proj.size() == 0) {
          proj.resize(out.rows(), out.cols());
          for (double& v : proj.reshaped()) v = rng.uniform(-1.0, 1.0);
        }
        return sum(row_dot(out, g.constant(proj)));
      };
      GradCheckResult r = grad_check(loss, s, kAllGroups);
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
    }
    EXPECT_LT(worst, 1e-4) << c.name;
    EXPECT_GT(checked, 100u) << c.name;
  }
}

}  // namespace
}  // namespace kgadv

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

// Parameter storage, RMSProp, clipping and the gradient checker.

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "kgadv/advtrain.h"
#include "kgadv/autodiff.h"
#include "kgadv/grad_check.h"
#include "kgadv/optim.h"
#include "kgadv/param_store.h"
#include "kgadv/scorers.h"

namespace kgadv {
namespace {

ParamStore scalar_store(float theta) {
  ParamStore s;
  ParamId id = s.add("theta", Group::kShared, {1});
  s[id].value(0, 0) = theta;
  return s;
}

GradMap single_grad(double g) {
  GradMap m;
  m.grads.push_back(MatrixD::Constant(1, 1, g));
  return m;
}

// --- ParamStore and init ---------------------------------------------------------

TEST(InitEmbeddings, RowsHaveUnitNorm) {
  Rng rng(1);
  ParamStore s = init_embeddings(200, 11, 50, rng);
  for (const char* name : {"E", "R"}) {
    const MatrixF& t = s.at(name).value;
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      EXPECT_NEAR(t.row(i).cast<double>().norm(), 1.0, 1e-6);
    }
  }
}

TEST(InitEmbeddings, ShapesFollowVocabulary) {
  Rng rng(1);
  ParamStore s = init_embeddings(40943, 2, 100, rng);
  EXPECT_EQ(s.at("E").value.rows(), 40943);
  EXPECT_EQ(s.at("E").value.cols(), 100);
  EXPECT_EQ(s.at("E").shape, (std::vector<std::uint32_t>{40943, 100}));
  EXPECT_EQ(s.at("R").value.rows(), 2);
  EXPECT_EQ(s.at("E").group, Group::kShared);
}

TEST(InitEmbeddings, SameSeedBitIdentical) {
  Rng a(99), b(99), c(100);
  EXPECT_TRUE(init_embeddings(30, 4, 8, a) == init_embeddings(30, 4, 8, b));
  Rng d(99);
  EXPECT_FALSE(init_embeddings(30, 4, 8, d) == init_embeddings(30, 4, 8, c));
}

TEST(ParamStore, RejectsDuplicatesAndBadRank) {
  ParamStore s;
  s.add("w", Group::kGenerator, {3, 2});
  EXPECT_THROW(s.add("w", Group::kGenerator, {2}), std::invalid_argument);
  EXPECT_THROW(s.add("x", Group::kGenerator, {}), std::invalid_argument);
  EXPECT_THROW(s.add("y", Group::kGenerator, {1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(s.id("missing"), std::out_of_range);
}

TEST(ParamStore, SharedTableSeenByBothScorers) {
  Rng rng(3);
  ParamStore s = init_embeddings(6, 2, 4, rng);
  Scorer gn({Family::kTransE, Role::kGenerator}, 4);
  Scorer dn({Family::kMlp, Role::kDiscriminator, 1, 4}, 4);
  gn.register_params(s, rng);
  dn.register_params(s, rng);
  gn.bind(s);
  dn.bind(s);
  std::vector<std::int32_t> row{2};
  s.at("E").value(2, 1) = 0.75f;
  Graph g(s);
  Var via_gn = gn.generate(g, row, std::vector<std::int32_t>{0});
  // TransE generation is h + r, so subtracting r recovers the shared row.
  EXPECT_DOUBLE_EQ(via_gn.value()(0, 1) - s.at("R").value(0, 1),
                   static_cast<double>(0.75f) + 0.0);
  std::size_t entity_tables = 0;
  for (const Param& p : s) entity_tables += p.name == "E";
  EXPECT_EQ(entity_tables, 1u);
}

// --- RMSProp ---------------------------------------------------------------------

TEST(RmsProp, HandComputedSingleStep) {
  ParamStore s = scalar_store(1.0f);
  RmsProp opt({.learning_rate = 0.001, .decay = 0.9, .epsilon = 1e-8, .weight_decay = 0.0});
  opt.step(s, single_grad(1.0));
  // s = 0.1, theta = 1 - 0.001 / (sqrt(0.1) + 1e-8)
  const double expected = 1.0 - 0.001 / (std::sqrt(0.1) + 1e-8);
  EXPECT_NEAR(opt.mean_square(0)(0, 0), 0.1, 1e-7);
  EXPECT_NEAR(s[0].value(0, 0), expected, 1e-6);
  EXPECT_NEAR(s[0].value(0, 0), 0.99684, 1e-5);
}

TEST(RmsProp, ZeroGradientOnlyDecays) {
  ParamStore s = scalar_store(2.0f);
  RmsProp opt({.learning_rate = 0.01, .weight_decay = 0.1});
  opt.step(s, single_grad(0.0));
  EXPECT_NEAR(s[0].value(0, 0), 2.0 - 0.01 * 0.1 * 2.0, 1e-6);
  RmsProp plain({.learning_rate = 0.01});
  ParamStore t = scalar_store(2.0f);
  plain.step(t, single_grad(0.0));
  EXPECT_EQ(t[0].value(0, 0), 2.0f);
}

TEST(RmsProp, QuadraticDescendsMonotonically) {
  ParamStore s = scalar_store(1.0f);
  RmsProp opt({.learning_rate = 0.001});
  double prev = std::abs(s[0].value(0, 0));
  for (int i = 0; i < 100; ++i) {
    Graph g(s, kAllGroups);
    Var loss = sum(sq_norm_rows(g.param(0)));
    opt.step(s, g.backward(loss));
    const double cur = std::abs(s[0].value(0, 0));
    ASSERT_LT(cur, prev) << "step " << i;
    prev = cur;
  }
}

TEST(RmsProp, SingleStepLowersPositiveDefiniteQuadratic) {
  Rng rng(8);
  ParamStore s;
  ParamId id = s.add("x", Group::kShared, {1, 6});
  for (int j = 0; j < 6; ++j) s[id].value(0, j) = static_cast<float>(rng.uniform(-1, 1));
  auto loss_value = [&] {
    Graph g(s);
    return sum(sq_norm_rows(g.param(id))).scalar();
  };
  const double before = loss_value();
  Graph g(s, kAllGroups);
  RmsProp opt({.learning_rate = 1e-3});
  opt.step(s, g.backward(sum(sq_norm_rows(g.param(id)))));
  EXPECT_LT(loss_value(), before);
}

TEST(RmsProp, NonFiniteGradientAbortsWithoutUpdate) {
  ParamStore s = scalar_store(1.0f);
  RmsProp opt;
  EXPECT_THROW(opt.step(s, single_grad(std::numeric_limits<double>::quiet_NaN())),
               NumericError);
  EXPECT_THROW(opt.step(s, single_grad(std::numeric_limits<double>::infinity())),
               NumericError);
  EXPECT_EQ(s[0].value(0, 0), 1.0f);
}

TEST(RmsProp, RunningMeanNonNegative) {
  ParamStore s = scalar_store(0.5f);
  RmsProp opt;
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    opt.step(s, single_grad(rng.uniform(-3, 3)));
    ASSERT_GE(opt.mean_square(0)(0, 0), 0.0f);
  }
}

TEST(RmsProp, FrozenParametersUntouched) {
  ParamStore s;
  s.add("a", Group::kGenerator, {1});
  s.add("b", Group::kDiscriminator, {1});
  s[0].value(0, 0) = 1.0f;
  s[1].value(0, 0) = 1.0f;
  Graph g(s, mask(Group::kGenerator));
  Var loss = sum(g.param(0)) + sum(g.param(1));
  GradMap grads = g.backward(loss);
  EXPECT_FALSE(grads.has(1));
  RmsProp opt({.weight_decay = 0.5});
  opt.step(s, grads);
  EXPECT_NE(s[0].value(0, 0), 1.0f);
  EXPECT_EQ(s[1].value(0, 0), 1.0f);
}

// --- clipping --------------------------------------------------------------------

TEST(ClipWeights, ClampsOutsideValues) {
  ParamStore s;
  ParamId id = s.add("dn.w", Group::kDiscriminator, {2});
  s[id].value << 0.02f, -0.3f;
  clip_weights(s, mask(Group::kDiscriminator), 0.01f);
  EXPECT_EQ(s[id].value(0, 0), 0.01f);
  EXPECT_EQ(s[id].value(0, 1), -0.01f);
}

TEST(ClipWeights, InsideValuesUnchangedAndIdempotent) {
  Rng rng(4);
  ParamStore s;
  ParamId a = s.add("dn.w", Group::kDiscriminator, {10, 10});
  ParamId b = s.add("gn.w", Group::kGenerator, {4});
  for (float& v : s[a].value.reshaped()) v = static_cast<float>(rng.uniform(-0.2, 0.2));
  s[b].value.setConstant(5.0f);
  ParamStore once = s;
  clip_weights(once, mask(Group::kDiscriminator), 0.05f);
  EXPECT_LE(once.max_abs(mask(Group::kDiscriminator)), 0.05f);
  EXPECT_EQ(once[b].value(0, 0), 5.0f);
  for (Eigen::Index i = 0; i < s[a].value.size(); ++i) {
    float v = s[a].value.data()[i];
    if (std::abs(v) <= 0.05f) EXPECT_EQ(once[a].value.data()[i], v);
  }
  ParamStore twice = once;
  clip_weights(twice, mask(Group::kDiscriminator), 0.05f);
  EXPECT_TRUE(once == twice);
}

TEST(ClipWeights, RejectsNonPositiveThreshold) {
  ParamStore s = scalar_store(1.0f);
  EXPECT_THROW(clip_weights(s, kAllGroups, 0.0f), std::invalid_argument);
}

// --- grad_check ------------------------------------------------------------------

TEST(GradCheck, SquareAtThree) {
  ParamStore s = scalar_store(3.0f);
  auto r = grad_check([](Graph& g) { return sum(sq_norm_rows(g.param(0))); }, s, kAllGroups);
  EXPECT_EQ(r.checked, 1u);
  EXPECT_LT(r.max_rel_error, 1e-8);
  EXPECT_EQ(s[0].value(0, 0), 3.0f);  // restored
}

TEST(GradCheck, ActiveMarginHingePasses) {
  // [2 pos - gen - neg + gamma]_+ with gamma large enough to keep it open.
  Rng rng(6);
  ParamStore s;
  ParamId x = s.add("dn.x", Group::kDiscriminator, {3, 4});
  ParamId y = s.add("dn.y", Group::kDiscriminator, {3, 4});
  for (ParamId id : {x, y}) {
    for (float& v : s[id].value.reshaped()) v = static_cast<float>(rng.uniform(-1, 1));
  }
  auto loss = [&](Graph& g) {
    Var pos = sq_norm_rows(g.param(x));
    Var gen = sq_norm_rows(g.param(y));
    Var neg = sq_norm_rows(g.param(x) - g.param(y));
    return loss_d_margin(pos, gen, neg, 30.0);
  };
  auto r = grad_check(loss, s, kAllGroups);
  EXPECT_LT(r.max_rel_error, 1e-4);
  EXPECT_GT(r.checked, 0u);
}

TEST(GradCheck, KinkExcludedAndReported) {
  ParamStore s = scalar_store(0.0f);
  auto r = grad_check([](Graph& g) { return sum(relu(g.param(0))); }, s, kAllGroups);
  EXPECT_EQ(r.kinks_excluded, 1u);
  EXPECT_EQ(r.checked, 0u);
}

TEST(GradCheck, DetectsWrongGradient) {
  ParamStore s = scalar_store(1.5f);
  // detach() hides a dependence, so the analytic gradient misses it.
  auto r = grad_check(
      [](Graph& g) {
        Var x = g.param(0);
        return sum(sq_norm_rows(x)) + sum(sq_norm_rows(detach(x)));
      },
      s, kAllGroups);
  EXPECT_GT(r.max_rel_error, 0.4);
}

TEST(RelativeError, UsesFloor) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9, 1e-6), 1e-3);
}

}  // namespace
}  // namespace kgadv

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

#include "kgadv/evalkit.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "test_util.h"

namespace kgadv {
namespace {

using testing::named;

struct Model {
  ParamStore store;
  Scorer gn{{Family::kTransE, Role::kGenerator}, 1};
};

Model transe_model(const KnowledgeGraph& kg, int k, std::uint64_t seed) {
  Rng rng(seed);
  Model m{init_embeddings(kg.vocab.num_entities(), kg.vocab.num_relations(), k, rng),
          Scorer({Family::kTransE, Role::kGenerator}, k)};
  m.gn.bind(m.store);
  return m;
}

// Exhaustive rank from first principles: generate h + r, measure every
// entity, drop other facts, count ties against the truth.
std::int64_t brute_force_rank(const Triple& q, const ParamStore& s,
                              const std::set<std::tuple<int, int, int>>& facts) {
  const MatrixF& e = s.at("E").value;
  const MatrixF& r = s.at("R").value;
  const Eigen::Index k = e.cols();
  std::vector<double> gen(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    gen[j] = static_cast<double>(e(q.head, j)) + static_cast<double>(r(q.rel, j));
  }
  auto dist = [&](int ent) {
    double acc = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      double d = gen[j] - static_cast<double>(e(ent, j));
      acc += d * d;
    }
    return acc;
  };
  const double target = dist(q.tail);
  std::int64_t rank = 1;
  for (int ent = 0; ent < e.rows(); ++ent) {
    if (ent == q.tail) continue;
    if (facts.count({q.head, q.rel, ent})) continue;
    if (dist(ent) <= target) ++rank;
  }
  return rank;
}

std::set<std::tuple<int, int, int>> fact_set(const KnowledgeGraph& kg) {
  std::set<std::tuple<int, int, int>> f;
  for (const auto* split : {&kg.train, &kg.valid, &kg.test}) {
    for (const Triple& t : *split) f.insert({t.head, t.rel, t.tail});
  }
  // Reverse facts of the test split are known as well.
  for (const Triple& t : kg.test) {
    if (auto rv = kg.vocab.reverse_of(t.rel)) f.insert({t.tail, *rv, t.head});
  }
  return f;
}

// --- ranking ---------------------------------------------------------------------

TEST(RankQuery, ExactGenerationRanksFirst) {
  auto kg = build_graph(named({{"a", "r", "b"}, {"b", "r", "c"}}), {}, {});
  Model m = transe_model(kg, 3, 1);
  MatrixF& e = m.store.at("E").value;
  MatrixF& r = m.store.at("R").value;
  e << 0, 0, 0, 1, 0, 0, 5, 5, 5;
  r << 1, 0, 0;
  // G(a, r) = E[b] exactly.
  RankRecord rec = rank_query(Triple{0, 0, 1}, m.store, m.gn, TruthIndex{});
  EXPECT_EQ(rec.rank, 1);
  EXPECT_EQ(rec.raw_rank, 1);
}

TEST(RankQuery, EquidistantEntitiesRankPessimistically) {
  auto kg = build_graph(named({{"a", "r", "b"}, {"c", "r", "d"}}), {}, {});
  Model m = transe_model(kg, 2, 1);
  // G(a, r) = E[a] + r is the origin; every entity lies on the unit circle.
  m.store.at("E").value << 1, 0, 0, 1, -1, 0, 0, -1;
  m.store.at("R").value << -1, 0;
  RankRecord rec = rank_query(Triple{0, 0, 1}, m.store, m.gn, TruthIndex{});
  EXPECT_EQ(rec.rank, 4);  // all four candidates tie
  TruthIndex truth;
  truth.insert(Triple{0, 0, 3});
  EXPECT_EQ(rank_query(Triple{0, 0, 1}, m.store, m.gn, truth).rank, 3);
}

TEST(RankQuery, MatchesBruteForceOnRandomGraphs) {
  std::mt19937_64 gen(2024);
  int queries = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + trial % 18;  // up to 20 entities
    auto kg = testing::random_graph(gen, n, 1 + trial % 3, 2 * n, n / 2 + 1);
    augment_reverse(kg);
    Model m = transe_model(kg, 4, static_cast<std::uint64_t>(trial));
    auto facts = fact_set(kg);
    for (const auto* split : {&kg.train, &kg.test}) {
      for (const Triple& q : *split) {
        RankRecord rec = rank_query(q, m.store, m.gn, kg.truth);
        ASSERT_EQ(rec.rank, brute_force_rank(q, m.store, facts)) << "trial " << trial;
        ASSERT_GE(rec.rank, 1);
        ASSERT_LE(rec.rank, rec.raw_rank);
        ++queries;
      }
    }
  }
  EXPECT_GT(queries, 1000);
}

TEST(LinkPrediction, BatchedEqualsSingleQueriesAndRewritesHeads) {
  std::mt19937_64 gen(5);
  auto kg = testing::random_graph(gen, 25, 3, 60, 15);
  augment_reverse(kg);
  Model m = transe_model(kg, 5, 3);
  auto result = evaluate_link_prediction(kg, kg.test, m.store, m.gn);
  std::size_t tails = 0, heads = 0;
  for (const RankRecord& r : result.records) {
    EXPECT_EQ(r.rank, rank_query(r.query, m.store, m.gn, kg.truth).rank);
    if (r.direction == Direction::kTail) {
      ++tails;
      EXPECT_FALSE(kg.vocab.is_reverse(r.query.rel));
    } else {
      ++heads;
      EXPECT_TRUE(kg.vocab.is_reverse(r.query.rel));
    }
  }
  EXPECT_EQ(tails, heads);
  EXPECT_EQ(tails + result.skipped_unseen, kg.test.size());
}

TEST(LinkPrediction, UnseenEntitiesSkippedAndCounted) {
  auto kg = build_graph(named({{"a", "r", "b"}}), {}, named({{"a", "r", "z"}, {"b", "r", "a"}}));
  augment_reverse(kg);
  Model m = transe_model(kg, 3, 1);
  auto result = evaluate_link_prediction(kg, kg.test, m.store, m.gn);
  EXPECT_EQ(result.skipped_unseen, 1u);
  EXPECT_EQ(result.records.size(), 2u);
}

// --- metrics ---------------------------------------------------------------------

std::vector<RankRecord> records(std::initializer_list<std::int64_t> ranks) {
  std::vector<RankRecord> out;
  for (auto r : ranks) out.push_back(RankRecord{{}, Direction::kTail, r, r});
  return out;
}

TEST(Metrics, Examples) {
  auto a = aggregate_metrics(records({1, 2, 10}));
  EXPECT_NEAR(a.mr, 4.333, 1e-3);
  EXPECT_NEAR(a.mrr, 0.5333, 1e-4);
  EXPECT_EQ(a.hits10, 1.0);
  EXPECT_EQ(aggregate_metrics(records({11})).hits10, 0.0);
  auto p = aggregate_metrics(records({1, 1, 1}));
  EXPECT_EQ(p.mr, 1.0);
  EXPECT_EQ(p.mrr, 1.0);
  EXPECT_EQ(p.hits10, 1.0);
  EXPECT_THROW(aggregate_metrics(records({})), std::invalid_argument);
}

TEST(Metrics, UnionIsSizeWeighted) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<RankRecord> x, y;
    std::uniform_int_distribution<int> rank(1, 40), len(1, 30);
    for (int i = len(gen); i > 0; --i) x.push_back(RankRecord{{}, Direction::kTail, rank(gen), 0});
    for (int i = len(gen); i > 0; --i) y.push_back(RankRecord{{}, Direction::kTail, rank(gen), 0});
    std::vector<RankRecord> all = x;
    all.insert(all.end(), y.begin(), y.end());
    auto mx = aggregate_metrics(x), my = aggregate_metrics(y), ma = aggregate_metrics(all);
    const double wx = static_cast<double>(x.size()) / all.size(), wy = 1.0 - wx;
    EXPECT_NEAR(ma.mr, wx * mx.mr + wy * my.mr, 1e-9);
    EXPECT_NEAR(ma.mrr, wx * mx.mrr + wy * my.mrr, 1e-12);
    EXPECT_NEAR(ma.hits10, wx * mx.hits10 + wy * my.hits10, 1e-12);
    EXPECT_GE(ma.mr, 1.0);
    EXPECT_GT(ma.mrr, 0.0);
    EXPECT_LE(ma.mrr, 1.0);
  }
}

TEST(Metrics, TextFormat) {
  auto m = aggregate_metrics(records({1, 2, 10}));
  std::string text = format_metrics_text(m);
  EXPECT_NE(text.find("MRR\t0.5333\n"), std::string::npos) << text;
  EXPECT_NE(text.find("Hits@10\t100.0%\n"), std::string::npos) << text;
  EXPECT_EQ(text.find("Hits@1\t"), std::string::npos);
  EXPECT_NE(format_metrics_text(m, &m, true).find("Hits@3\t"), std::string::npos);
  std::vector<std::pair<std::string, MetricsReport>> rows{{"all", m}};
  std::string tsv = format_metrics_tsv(rows);
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "scope\tcount\tMR\tMRR\tHits@1\tHits@3\tHits@10");
}

// --- thresholds ------------------------------------------------------------------

double accuracy_at(const std::vector<double>& s, const std::vector<bool>& l, double delta) {
  int ok = 0;
  for (std::size_t i = 0; i < s.size(); ++i) ok += (s[i] < delta) == l[i];
  return static_cast<double>(ok) / s.size();
}

TEST(Thresholds, SeparableScores) {
  std::vector<double> s{0.1, 0.2, 0.5, 0.9};
  std::vector<bool> l{true, true, false, false};
  auto c = best_threshold(s, l);
  EXPECT_EQ(c.accuracy, 1.0);
  EXPECT_GT(c.delta, 0.2);
  EXPECT_LT(c.delta, 0.5);
}

TEST(Thresholds, InseparableScores) {
  std::vector<double> s{0.3, 0.6, 0.3, 0.6};
  std::vector<bool> l{true, true, false, false};
  EXPECT_EQ(best_threshold(s, l).accuracy, 0.5);
}

TEST(Thresholds, ScanIsOptimalAgainstExhaustiveOracle) {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> len(1, 200);
    std::uniform_real_distribution<double> u(-2, 2);
    const int n = trial == 0 ? 200 : len(gen);
    std::vector<double> s(n);
    std::vector<bool> l(n);
    for (int i = 0; i < n; ++i) {
      l[i] = gen() % 2;
      // Coarse values create ties; positives skew low.
      s[i] = std::round((u(gen) - (l[i] ? 0.5 : 0.0)) * 8) / 8;
    }
    auto c = best_threshold(s, l);
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> cuts{sorted.front() - 1, sorted.back() + 1};
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) cuts.push_back((sorted[i] + sorted[i + 1]) / 2);
    double best = 0;
    for (double d : cuts) best = std::max(best, accuracy_at(s, l, d));
    ASSERT_EQ(c.accuracy, best) << "trial " << trial;
    ASSERT_EQ(accuracy_at(s, l, c.delta), c.accuracy);
    // Nothing beats the oracle's maximum, even between candidate cuts.
    for (int probe = 0; probe < 50; ++probe) {
      ASSERT_LE(accuracy_at(s, l, u(gen) * 1.5), best);
    }
  }
}

TEST(Thresholds, InvariantUnderIncreasingTransform) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<double> s, t;
  std::vector<Triple> triples;
  std::vector<bool> l;
  for (int i = 0; i < 300; ++i) {
    l.push_back(gen() % 2);
    s.push_back(u(gen) + (l.back() ? 0.0 : 0.8));
    t.push_back(std::exp(2.0 * s.back()) - 7.0);
    triples.push_back(Triple{0, static_cast<RelationId>(i % 4), 1});
  }
  auto ts = select_thresholds(s, triples, l, 5);
  auto tt = select_thresholds(t, triples, l, 5);
  EXPECT_DOUBLE_EQ(classification_accuracy(s, triples, l, ts),
                   classification_accuracy(t, triples, l, tt));
}

TEST(Thresholds, PerRelationWithFallback) {
  std::vector<double> s{0.1, 0.3, 5.0, 7.0};
  std::vector<Triple> tr{{0, 0, 1}, {0, 0, 1}, {0, 1, 1}, {0, 1, 1}};
  std::vector<bool> l{true, false, true, false};
  auto table = select_thresholds(s, tr, l, 3);
  ASSERT_TRUE(table.per_relation[0].has_value());
  EXPECT_DOUBLE_EQ(*table.per_relation[0], 0.2);
  EXPECT_DOUBLE_EQ(*table.per_relation[1], 6.0);
  EXPECT_FALSE(table.per_relation[2].has_value());
  EXPECT_EQ(table.threshold(2), table.fallback);
  EXPECT_EQ(classification_accuracy(s, tr, l, table), 1.0);
}

TEST(Classify, StrictInequality) {
  ThresholdTable t;
  t.per_relation = {0.5, std::nullopt};
  t.fallback = 2.0;
  EXPECT_TRUE(classify(0.49, 0, t));
  EXPECT_FALSE(classify(0.5, 0, t));
  EXPECT_TRUE(classify(1.9, 1, t));   // fallback
  EXPECT_TRUE(classify(1.9, 7, t));   // unknown relation
}

TEST(Classify, ThroughDiscriminator) {
  auto kg = build_graph(named({{"a", "r", "b"}, {"b", "r", "c"}}), {}, {});
  Rng rng(1);
  ParamStore s = init_embeddings(3, 1, 4, rng);
  Scorer dn({Family::kTransE, Role::kDiscriminator}, 4);
  dn.bind(s);
  std::vector<Triple> tr{{0, 0, 1}};
  double score = score_triples(tr, s, dn)[0];
  ThresholdTable t;
  t.per_relation = {score + 0.01};
  EXPECT_TRUE(classify(tr[0], s, dn, t));
  t.per_relation = {score};
  EXPECT_FALSE(classify(tr[0], s, dn, t));
}

TEST(Thresholds, ExportFormat) {
  auto kg = build_graph(named({{"a", "r", "b"}, {"a", "s", "b"}}), {}, {});
  ThresholdTable t;
  t.per_relation = {0.25, std::nullopt};
  t.fallback = 1.5;
  EXPECT_EQ(format_thresholds(t, kg.vocab), "r\t0.25\ns\t1.5\n");
}

}  // namespace
}  // namespace kgadv

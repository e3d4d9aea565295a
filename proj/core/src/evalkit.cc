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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "kgadv/autodiff.h"

namespace kgadv {
namespace {

constexpr std::size_t kEvalBatch = 1024;

// Sequential accumulation keeps the distances reproducible across builds.
void distances_to(const MatrixD& entities, const double* v, std::vector<double>& out) {
  const Eigen::Index n = entities.rows(), k = entities.cols();
  out.resize(static_cast<std::size_t>(n));
  for (Eigen::Index e = 0; e < n; ++e) {
    const double* row = entities.data() + e * k;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      double d = v[j] - row[j];
      acc += d * d;
    }
    out[static_cast<std::size_t>(e)] = acc;
  }
}

MatrixD generate_rows(const ParamStore& store, const Scorer& gn,
                      std::span<const std::int32_t> heads,
                      std::span<const std::int32_t> rels) {
  Graph g(store);
  return gn.generate(g, heads, rels).value();
}

std::string fixed(double v, int digits) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string_view to_string(Direction d) {
  return d == Direction::kTail ? "tail" : "head";
}

RankRecord rank_from_distances(std::span<const double> distances, EntityId truth,
                               std::span<const EntityId> known) {
  if (truth < 0 || static_cast<std::size_t>(truth) >= distances.size()) {
    throw std::out_of_range("rank_from_distances: true entity out of range");
  }
  const double dt = distances[static_cast<std::size_t>(truth)];
  std::int64_t raw = 1;
  for (std::size_t e = 0; e < distances.size(); ++e) {
    if (static_cast<EntityId>(e) != truth && distances[e] <= dt) ++raw;
  }
  std::int64_t filtered_out = 0;
  for (EntityId e : known) {
    if (e != truth && distances[static_cast<std::size_t>(e)] <= dt) ++filtered_out;
  }
  RankRecord r;
  r.rank = raw - filtered_out;
  r.raw_rank = raw;
  return r;
}

RankRecord rank_query(const Triple& query, const ParamStore& store, const Scorer& gn,
                      const TruthIndex& truth) {
  const std::int32_t h = query.head, rel = query.rel;
  MatrixD gen = generate_rows(store, gn, {&h, 1}, {&rel, 1});
  MatrixD entities = store.at(std::string(kEntityTable)).value.cast<double>();
  std::vector<double> dist;
  distances_to(entities, gen.data(), dist);
  RankRecord r = rank_from_distances(dist, query.tail, truth.tails(query.head, query.rel));
  r.query = query;
  return r;
}

LinkPredictionResult evaluate_link_prediction(const KnowledgeGraph& kg,
                                              std::span<const Triple> split,
                                              const ParamStore& store, const Scorer& gn) {
  LinkPredictionResult out;
  const std::vector<bool> seen = kg.seen_in_train();
  std::vector<Triple> queries;
  std::vector<Direction> dirs;
  for (const Triple& t : kg.original_direction(split)) {
    if (!seen[static_cast<std::size_t>(t.head)] || !seen[static_cast<std::size_t>(t.tail)]) {
      ++out.skipped_unseen;
      continue;
    }
    queries.push_back(t);
    dirs.push_back(Direction::kTail);
    if (auto rev = kg.vocab.reverse_of(t.rel)) {
      queries.push_back(Triple{t.tail, *rev, t.head});
      dirs.push_back(Direction::kHeadViaReverse);
    }
  }

  MatrixD entities = store.at(std::string(kEntityTable)).value.cast<double>();
  std::vector<double> dist;
  out.records.reserve(queries.size());
  for (std::size_t lo = 0; lo < queries.size(); lo += kEvalBatch) {
    std::size_t hi = std::min(queries.size(), lo + kEvalBatch);
    std::vector<std::int32_t> heads, rels;
    for (std::size_t i = lo; i < hi; ++i) {
      heads.push_back(queries[i].head);
      rels.push_back(queries[i].rel);
    }
    MatrixD gen = generate_rows(store, gn, heads, rels);
    for (std::size_t i = lo; i < hi; ++i) {
      const Triple& q = queries[i];
      distances_to(entities, gen.data() + (i - lo) * gen.cols(), dist);
      RankRecord r = rank_from_distances(dist, q.tail, kg.truth.tails(q.head, q.rel));
      r.query = q;
      r.direction = dirs[i];
      out.records.push_back(r);
    }
  }
  return out;
}

MetricsReport aggregate_ranks(std::span<const std::int64_t> ranks) {
  if (ranks.empty()) throw std::invalid_argument("aggregate_metrics: no records");
  MetricsReport m;
  m.count = ranks.size();
  for (std::int64_t r : ranks) {
    if (r < 1) throw std::invalid_argument("aggregate_metrics: rank below 1");
    const double rd = static_cast<double>(r);
    m.mr += rd;
    m.mrr += 1.0 / rd;
    m.hits1 += r <= 1 ? 1.0 : 0.0;
    m.hits3 += r <= 3 ? 1.0 : 0.0;
    m.hits10 += r <= 10 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(m.count);
  m.mr /= n;
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

MetricsReport aggregate_metrics(std::span<const RankRecord> records, bool raw) {
  std::vector<std::int64_t> ranks;
  ranks.reserve(records.size());
  for (const RankRecord& r : records) ranks.push_back(raw ? r.raw_rank : r.rank);
  return aggregate_ranks(ranks);
}

std::string format_metrics_text(const MetricsReport& report, const MetricsReport* raw,
                                bool diagnostics) {
  std::string s;
  s += "MR\t" + fixed(report.mr, 1) + "\n";
  s += "MRR\t" + fixed(report.mrr, 4) + "\n";
  s += "Hits@10\t" + fixed(report.hits10 * 100.0, 1) + "%\n";
  if (diagnostics) {
    s += "Hits@1\t" + fixed(report.hits1 * 100.0, 1) + "%\n";
    s += "Hits@3\t" + fixed(report.hits3 * 100.0, 1) + "%\n";
    if (raw) {
      s += "raw MR\t" + fixed(raw->mr, 1) + "\n";
      s += "raw MRR\t" + fixed(raw->mrr, 4) + "\n";
      s += "raw Hits@10\t" + fixed(raw->hits10 * 100.0, 1) + "%\n";
    }
  }
  return s;
}

std::string format_metrics_tsv(
    std::span<const std::pair<std::string, MetricsReport>> rows) {
  std::string s = "scope\tcount\tMR\tMRR\tHits@1\tHits@3\tHits@10\n";
  for (const auto& [scope, m] : rows) {
    s += scope + '\t' + std::to_string(m.count) + '\t' + fixed(m.mr, 4) + '\t' +
         fixed(m.mrr, 6) + '\t' + fixed(m.hits1, 6) + '\t' + fixed(m.hits3, 6) + '\t' +
         fixed(m.hits10, 6) + '\n';
  }
  return s;
}

// --- triple classification ------------------------------------------------------

double ThresholdTable::threshold(RelationId rel) const {
  if (rel >= 0 && static_cast<std::size_t>(rel) < per_relation.size() &&
      per_relation[static_cast<std::size_t>(rel)]) {
    return *per_relation[static_cast<std::size_t>(rel)];
  }
  return fallback;
}

ThresholdChoice best_threshold(std::span<const double> scores,
                               const std::vector<bool>& labels) {
  if (scores.empty() || scores.size() != labels.size()) {
    throw std::invalid_argument("best_threshold: need equally many scores and labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  const std::size_t total = scores.size();
  std::size_t negatives = 0;
  for (bool l : labels) negatives += l ? 0 : 1;

  // Below the minimum every triple is predicted false.
  std::size_t correct = negatives;
  ThresholdChoice best{scores[order.front()] - 1.0,
                       static_cast<double>(correct) / static_cast<double>(total)};
  std::size_t i = 0;
  while (i < total) {
    const double s = scores[order[i]];
    // Moving the cut past a group of equal scores flips all of them to true.
    while (i < total && scores[order[i]] == s) {
      correct += labels[order[i]] ? 1 : 0;
      correct -= labels[order[i]] ? 0 : 1;
      ++i;
    }
    const double delta = i < total ? s + (scores[order[i]] - s) / 2.0 : s + 1.0;
    const double acc = static_cast<double>(correct) / static_cast<double>(total);
    if (acc > best.accuracy) best = ThresholdChoice{delta, acc};
  }
  return best;
}

ThresholdTable select_thresholds(std::span<const double> scores,
                                 std::span<const Triple> triples,
                                 const std::vector<bool>& labels,
                                 std::int32_t num_relations) {
  if (scores.size() != triples.size() || scores.size() != labels.size()) {
    throw std::invalid_argument("select_thresholds: mismatched inputs");
  }
  ThresholdTable table;
  table.per_relation.assign(static_cast<std::size_t>(num_relations), std::nullopt);
  if (scores.empty()) return table;
  table.fallback = best_threshold(scores, labels).delta;

  std::vector<std::vector<std::size_t>> by_rel(static_cast<std::size_t>(num_relations));
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const RelationId r = triples[i].rel;
    if (r < 0 || r >= num_relations) {
      throw std::out_of_range("select_thresholds: relation out of range");
    }
    by_rel[static_cast<std::size_t>(r)].push_back(i);
  }
  for (std::size_t r = 0; r < by_rel.size(); ++r) {
    if (by_rel[r].empty()) continue;
    std::vector<double> s;
    std::vector<bool> l;
    for (std::size_t i : by_rel[r]) {
      s.push_back(scores[i]);
      l.push_back(labels[i]);
    }
    table.per_relation[r] = best_threshold(s, l).delta;
  }
  return table;
}

bool classify(double score, RelationId rel, const ThresholdTable& table) {
  return score < table.threshold(rel);
}

bool classify(const Triple& t, const ParamStore& store, const Scorer& dn,
              const ThresholdTable& table) {
  return classify(score_triples({&t, 1}, store, dn).front(), t.rel, table);
}

std::vector<double> score_triples(std::span<const Triple> triples,
                                  const ParamStore& store, const Scorer& dn) {
  std::vector<double> out;
  out.reserve(triples.size());
  for (std::size_t lo = 0; lo < triples.size(); lo += kEvalBatch) {
    std::size_t hi = std::min(triples.size(), lo + kEvalBatch);
    std::vector<std::int32_t> h, r, t;
    for (std::size_t i = lo; i < hi; ++i) {
      h.push_back(triples[i].head);
      r.push_back(triples[i].rel);
      t.push_back(triples[i].tail);
    }
    Graph g(store);
    const MatrixD& s = dn.score_entities(g, h, r, t).value();
    for (Eigen::Index i = 0; i < s.rows(); ++i) out.push_back(s(i, 0));
  }
  return out;
}

double classification_accuracy(std::span<const double> scores,
                               std::span<const Triple> triples,
                               const std::vector<bool>& labels,
                               const ThresholdTable& table) {
  if (scores.empty() || scores.size() != triples.size() || scores.size() != labels.size()) {
    throw std::invalid_argument("classification_accuracy: mismatched or empty inputs");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (classify(scores[i], triples[i].rel, table) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

std::string format_thresholds(const ThresholdTable& table, const Vocab& vocab) {
  std::string s;
  for (RelationId r = 0; r < vocab.num_relations(); ++r) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), table.threshold(r));
    s += vocab.relation_name(r) + '\t' + std::string(buf, res.ptr) + '\n';
  }
  return s;
}

}  // namespace kgadv

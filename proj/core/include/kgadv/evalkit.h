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

// Link prediction through the generator and triple classification through
// the discriminator.
//
// A tail query (h, r, ?) is answered by generating t'_g = G(h, r) and ranking
// every entity e by d(e) = ||t'_g - E[e]||^2. Candidates forming another known
// fact are filtered out, and ties count against the true entity:
//
//   rank = 1 + #{ e != t : (h, r, e) not a known fact, d(e) <= d(t) }
//
// Head queries (?, r, t) are asked as (t, r_rev, ?).

#ifndef KGADV_EVALKIT_H_
#define KGADV_EVALKIT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgadv/kgdata.h"
#include "kgadv/param_store.h"
#include "kgadv/scorers.h"

namespace kgadv {

enum class Direction : std::uint8_t { kTail, kHeadViaReverse };

std::string_view to_string(Direction d);

struct RankRecord {
  Triple query;  // tail query as asked, so rel may be a reverse relation
  Direction direction = Direction::kTail;
  std::int64_t rank = 0;      // filtered
  std::int64_t raw_rank = 0;  // unfiltered
};

/// Filtered and raw rank of `truth` given per-entity distances. `known` lists
/// entities to filter; `truth` itself is never filtered.
RankRecord rank_from_distances(std::span<const double> distances, EntityId truth,
                               std::span<const EntityId> known);

/// Ranks the true tail of `query` among all entities.
RankRecord rank_query(const Triple& query, const ParamStore& store, const Scorer& gn,
                      const TruthIndex& truth);

struct LinkPredictionResult {
  std::vector<RankRecord> records;
  /// Test triples skipped because an entity never occurs in training.
  std::size_t skipped_unseen = 0;
};

/// Ranks tail queries for every triple of `split`, plus head queries through
/// the reverse relation when the graph is augmented. Only original-direction
/// triples are used.
LinkPredictionResult evaluate_link_prediction(const KnowledgeGraph& kg,
                                              std::span<const Triple> split,
                                              const ParamStore& store, const Scorer& gn);

struct MetricsReport {
  std::size_t count = 0;
  double mr = 0.0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
};

/// Throws std::invalid_argument on empty input. `raw` aggregates raw ranks.
MetricsReport aggregate_metrics(std::span<const RankRecord> records, bool raw = false);
MetricsReport aggregate_ranks(std::span<const std::int64_t> ranks);

/// "MR\t...", "MRR\t0.xxxx", "Hits@10\txx.x%" lines; Hits@1/3 and raw
/// metrics only when `diagnostics` is set.
std::string format_metrics_text(const MetricsReport& report,
                                const MetricsReport* raw = nullptr,
                                bool diagnostics = false);
/// Header line plus one row per (scope, report).
std::string format_metrics_tsv(
    std::span<const std::pair<std::string, MetricsReport>> rows);

// --- triple classification ------------------------------------------------------

struct ThresholdTable {
  std::vector<std::optional<double>> per_relation;  // indexed by RelationId
  double fallback = 0.0;

  double threshold(RelationId rel) const;
};

struct ThresholdChoice {
  double delta = 0.0;
  double accuracy = 0.0;
};

/// Best cut over midpoints of adjacent distinct sorted scores, plus one cut
/// below the minimum and one above the maximum. Ties keep the lowest delta.
/// Throws std::invalid_argument on empty or mismatched input.
ThresholdChoice best_threshold(std::span<const double> scores,
                               const std::vector<bool>& labels);

/// Per-relation thresholds from labeled validation scores; relations without
/// validation examples get the global cut computed over every score.
ThresholdTable select_thresholds(std::span<const double> scores,
                                 std::span<const Triple> triples,
                                 const std::vector<bool>& labels,
                                 std::int32_t num_relations);

/// True iff score < threshold(rel).
bool classify(double score, RelationId rel, const ThresholdTable& table);
bool classify(const Triple& t, const ParamStore& store, const Scorer& dn,
              const ThresholdTable& table);

/// f_D for each triple, evaluated in batches.
std::vector<double> score_triples(std::span<const Triple> triples,
                                  const ParamStore& store, const Scorer& dn);

/// Fraction of triples whose predicted label matches.
double classification_accuracy(std::span<const double> scores,
                               std::span<const Triple> triples,
                               const std::vector<bool>& labels,
                               const ThresholdTable& table);

/// "relation\tdelta" lines; unseen relations carry the fallback.
std::string format_thresholds(const ThresholdTable& table, const Vocab& vocab);

}  // namespace kgadv

#endif  // KGADV_EVALKIT_H_

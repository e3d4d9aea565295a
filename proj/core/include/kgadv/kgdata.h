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

// Triple files, vocabularies, reverse-relation augmentation, the truth index
// used for filtering, and negative sampling.

#ifndef KGADV_KGDATA_H_
#define KGADV_KGDATA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgadv/common.h"

namespace kgadv {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head = 0;
  RelationId rel = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct NamedTriple {
  std::string head;
  std::string rel;
  std::string tail;

  friend bool operator==(const NamedTriple&, const NamedTriple&) = default;
};

/// A triple from a classification file; label is false for "-1" rows.
struct LabeledTriple {
  NamedTriple triple;
  bool label = true;
};

/// Reads a tab-separated triple file. Every nonempty line must carry exactly
/// three fields; otherwise DataError names the line and field count.
std::vector<NamedTriple> load_triples(const std::filesystem::path& path);

/// Like load_triples but accepts an optional fourth "1"/"-1" label column.
/// Unlabeled lines are positives.
std::vector<LabeledTriple> load_labeled_triples(
    const std::filesystem::path& path);

/// Suffix naming the synthetic reverse of a relation.
inline constexpr std::string_view kReverseSuffix = "_rev";

class Vocab {
 public:
  /// Returns the existing index or registers a new one (first-seen order).
  EntityId add_entity(std::string_view name);
  RelationId add_relation(std::string_view name);

  std::optional<EntityId> entity(std::string_view name) const;
  std::optional<RelationId> relation(std::string_view name) const;
  const std::string& entity_name(EntityId id) const { return entities_.at(id); }
  const std::string& relation_name(RelationId id) const {
    return relations_.at(id);
  }

  std::int32_t num_entities() const {
    return static_cast<std::int32_t>(entities_.size());
  }
  std::int32_t num_relations() const {
    return static_cast<std::int32_t>(relations_.size());
  }

  /// Registers `name + "_rev"` as the reverse of `rel`.
  RelationId add_reverse(RelationId rel);
  std::optional<RelationId> reverse_of(RelationId rel) const;
  bool is_reverse(RelationId rel) const;

  /// Order-sensitive digest of both name tables.
  std::uint64_t digest() const;

  /// Writes "index<TAB>name" lines.
  void export_entities(const std::filesystem::path& path) const;
  void export_relations(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::vector<RelationId> reverse_;      // -1 when absent
  std::vector<bool> is_reverse_;
};

/// Reads an "index<TAB>name" export back as the ordered name list.
std::vector<std::string> load_name_table(const std::filesystem::path& path);

/// Set of known-true triples, indexed by (head, relation) for filtering.
class TruthIndex {
 public:
  void insert(const Triple& t);
  bool contains(const Triple& t) const;
  /// Sorted tails known for (head, rel); empty if none.
  std::span<const EntityId> tails(EntityId head, RelationId rel) const;
  std::size_t size() const { return size_; }

 private:
  static std::uint64_t key(EntityId head, RelationId rel) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(head)) << 32) |
           static_cast<std::uint32_t>(rel);
  }
  std::unordered_map<std::uint64_t, std::vector<EntityId>> by_pair_;
  std::size_t size_ = 0;
};

struct KnowledgeGraph {
  Vocab vocab;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  TruthIndex truth;
  bool augmented = false;
  /// Within-split duplicate lines dropped while building.
  std::size_t duplicates_dropped = 0;

  /// Entities that occur in at least one training triple.
  std::vector<bool> seen_in_train() const;
  /// Triples whose relation is not a synthetic reverse.
  std::vector<Triple> original_direction(std::span<const Triple> split) const;
};

/// Encodes the three splits. Indices are assigned in first-seen order over
/// train, then valid, then test. A triple occurring in two splits is a
/// DataError; repeated lines inside one split are dropped and counted.
KnowledgeGraph build_graph(std::span<const NamedTriple> train,
                           std::span<const NamedTriple> valid,
                           std::span<const NamedTriple> test);

/// A graph plus labeled validation/test sets for triple classification.
/// Positives form the graph's valid/test splits; negatives stay out of the
/// truth index.
struct LabeledSet {
  std::vector<Triple> triples;
  std::vector<bool> labels;
};

struct ClassificationData {
  KnowledgeGraph kg;
  LabeledSet valid;
  LabeledSet test;
};

ClassificationData build_classification_data(
    std::span<const NamedTriple> train, std::span<const LabeledTriple> valid,
    std::span<const LabeledTriple> test);

/// Adds (t, r_rev, h) for every (h, r, t) in train and valid, registers each
/// reverse relation, and indexes the reverses of every split as truths. Test
/// keeps only original-direction triples. Throws std::logic_error when the
/// graph is already augmented.
void augment_reverse(KnowledgeGraph& kg);

struct RelationBern {
  double tph = 0.0;  // mean distinct tails per head
  double hpt = 0.0;  // mean distinct heads per tail

  /// Probability of corrupting the head.
  double head_probability() const { return tph / (tph + hpt); }
};

/// Indexed by RelationId; relations without training triples are nullopt.
struct BernStats {
  std::vector<std::optional<RelationBern>> per_relation;
};

BernStats compute_bern_stats(std::span<const Triple> train,
                             std::int32_t num_relations);

enum class SamplingMode { kUniform, kBernoulli };

std::string_view to_string(SamplingMode mode);
SamplingMode parse_sampling_mode(std::string_view s);

struct NegativeSample {
  Triple triple;
  /// True when every retry hit a known truth; `triple` is then the last
  /// candidate and may be a true fact.
  bool exhausted = false;
};

inline constexpr int kMaxNegativeRetries = 100;

/// Corrupts exactly one entity slot. Uniform mode always corrupts the tail;
/// Bernoulli mode corrupts the head with probability tph / (tph + hpt).
/// Candidates found in `truth` are rejected up to kMaxNegativeRetries times.
NegativeSample sample_negative(const Triple& triple, SamplingMode mode,
                               std::int32_t num_entities,
                               const TruthIndex& truth, const BernStats* bern,
                               Rng& rng);

}  // namespace kgadv

#endif  // KGADV_KGDATA_H_

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

#include "kgadv/kgdata.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace kgadv {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triple file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(lineno, split_tabs(line));
  }
}

[[noreturn]] void arity_error(const std::filesystem::path& path,
                              std::size_t lineno, std::size_t fields,
                              std::string_view expected) {
  throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                  std::string(expected) + " tab-separated fields, found " +
                  std::to_string(fields));
}

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::uint64_t h = static_cast<std::uint32_t>(t.head);
    h = h * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint32_t>(t.rel);
    h = h * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint32_t>(t.tail);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

Triple encode(Vocab& vocab, const NamedTriple& t) {
  // head, tail order matters for first-seen numbering.
  const EntityId h = vocab.add_entity(t.head);
  const RelationId r = vocab.add_relation(t.rel);
  const EntityId e = vocab.add_entity(t.tail);
  return {h, r, e};
}

void write_names(const std::filesystem::path& path,
                 const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << i << '\t' << names[i] << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

std::vector<NamedTriple> load_triples(const std::filesystem::path& path) {
  std::vector<NamedTriple> out;
  for_each_line(path, [&](std::size_t lineno, const auto& f) {
    if (f.size() != 3) arity_error(path, lineno, f.size(), "3");
    out.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2])});
  });
  return out;
}

std::vector<LabeledTriple> load_labeled_triples(
    const std::filesystem::path& path) {
  std::vector<LabeledTriple> out;
  for_each_line(path, [&](std::size_t lineno, const auto& f) {
    if (f.size() != 3 && f.size() != 4) arity_error(path, lineno, f.size(), "3 or 4");
    LabeledTriple lt{{std::string(f[0]), std::string(f[1]), std::string(f[2])}, true};
    if (f.size() == 4) {
      if (f[3] == "1") {
        lt.label = true;
      } else if (f[3] == "-1") {
        lt.label = false;
      } else {
        throw DataError(path.string() + ":" + std::to_string(lineno) +
                        ": label must be 1 or -1, found '" + std::string(f[3]) + "'");
      }
    }
    out.push_back(std::move(lt));
  });
  return out;
}

// --- Vocab -----------------------------------------------------------------

EntityId Vocab::add_entity(std::string_view name) {
  auto [it, inserted] = entity_index_.try_emplace(
      std::string(name), static_cast<EntityId>(entities_.size()));
  if (inserted) entities_.emplace_back(name);
  return it->second;
}

RelationId Vocab::add_relation(std::string_view name) {
  auto [it, inserted] = relation_index_.try_emplace(
      std::string(name), static_cast<RelationId>(relations_.size()));
  if (inserted) {
    relations_.emplace_back(name);
    reverse_.push_back(-1);
    is_reverse_.push_back(false);
  }
  return it->second;
}

std::optional<EntityId> Vocab::entity(std::string_view name) const {
  auto it = entity_index_.find(std::string(name));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> Vocab::relation(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

RelationId Vocab::add_reverse(RelationId rel) {
  if (reverse_.at(rel) >= 0) return reverse_[rel];
  const std::string name = relations_.at(rel) + std::string(kReverseSuffix);
  if (relation_index_.count(name)) {
    throw DataError("relation name '" + name + "' collides with a reverse relation");
  }
  const RelationId rev = add_relation(name);
  reverse_[rel] = rev;
  reverse_[rev] = rel;
  is_reverse_[rev] = true;
  return rev;
}

std::optional<RelationId> Vocab::reverse_of(RelationId rel) const {
  const RelationId r = reverse_.at(rel);
  if (r < 0) return std::nullopt;
  return r;
}

bool Vocab::is_reverse(RelationId rel) const { return is_reverse_.at(rel); }

std::uint64_t Vocab::digest() const {
  std::uint64_t h = fnv1a64("entities");
  for (const auto& e : entities_) h = fnv1a64(std::string_view(e.data(), e.size() + 1), h);
  h = fnv1a64("relations", h);
  for (const auto& r : relations_) h = fnv1a64(std::string_view(r.data(), r.size() + 1), h);
  return h;
}

void Vocab::export_entities(const std::filesystem::path& path) const {
  write_names(path, entities_);
}

void Vocab::export_relations(const std::filesystem::path& path) const {
  write_names(path, relations_);
}

std::vector<std::string> load_name_table(const std::filesystem::path& path) {
  std::vector<std::string> names;
  for_each_line(path, [&](std::size_t lineno, const auto& f) {
    if (f.size() != 2) arity_error(path, lineno, f.size(), "2");
    if (f[0] != std::to_string(names.size())) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": indices must be dense and ordered");
    }
    names.emplace_back(f[1]);
  });
  return names;
}

// --- TruthIndex --------------------------------------------------------------

void TruthIndex::insert(const Triple& t) {
  auto& tails = by_pair_[key(t.head, t.rel)];
  auto it = std::lower_bound(tails.begin(), tails.end(), t.tail);
  if (it != tails.end() && *it == t.tail) return;
  tails.insert(it, t.tail);
  ++size_;
}

bool TruthIndex::contains(const Triple& t) const {
  const auto tails = this->tails(t.head, t.rel);
  return std::binary_search(tails.begin(), tails.end(), t.tail);
}

std::span<const EntityId> TruthIndex::tails(EntityId head, RelationId rel) const {
  auto it = by_pair_.find(key(head, rel));
  if (it == by_pair_.end()) return {};
  return it->second;
}

// --- KnowledgeGraph ------------------------------------------------------------

std::vector<bool> KnowledgeGraph::seen_in_train() const {
  std::vector<bool> seen(static_cast<std::size_t>(vocab.num_entities()), false);
  for (const auto& t : train) {
    seen[t.head] = true;
    seen[t.tail] = true;
  }
  return seen;
}

std::vector<Triple> KnowledgeGraph::original_direction(
    std::span<const Triple> split) const {
  std::vector<Triple> out;
  for (const auto& t : split) {
    if (!vocab.is_reverse(t.rel)) out.push_back(t);
  }
  return out;
}

KnowledgeGraph build_graph(std::span<const NamedTriple> train,
                           std::span<const NamedTriple> valid,
                           std::span<const NamedTriple> test) {
  KnowledgeGraph kg;
  std::unordered_map<Triple, int, TripleHash> owner;
  const char* names[] = {"train", "valid", "test"};
  std::vector<Triple>* dest[] = {&kg.train, &kg.valid, &kg.test};
  std::span<const NamedTriple> src[] = {train, valid, test};
  for (int s = 0; s < 3; ++s) {
    for (const auto& nt : src[s]) {
      const Triple t = encode(kg.vocab, nt);
      auto [it, inserted] = owner.try_emplace(t, s);
      if (!inserted) {
        if (it->second == s) {
          ++kg.duplicates_dropped;
          continue;
        }
        throw DataError("triple (" + nt.head + ", " + nt.rel + ", " + nt.tail +
                        ") appears in both " + names[it->second] + " and " +
                        names[s]);
      }
      dest[s]->push_back(t);
      kg.truth.insert(t);
    }
  }
  return kg;
}

ClassificationData build_classification_data(
    std::span<const NamedTriple> train, std::span<const LabeledTriple> valid,
    std::span<const LabeledTriple> test) {
  std::vector<NamedTriple> valid_pos, test_pos;
  for (const auto& lt : valid) {
    if (lt.label) valid_pos.push_back(lt.triple);
  }
  for (const auto& lt : test) {
    if (lt.label) test_pos.push_back(lt.triple);
  }
  ClassificationData data;
  data.kg = build_graph(train, valid_pos, test_pos);
  auto labeled = [&](std::span<const LabeledTriple> rows) {
    LabeledSet set;
    for (const auto& lt : rows) {
      const Triple t = encode(data.kg.vocab, lt.triple);
      if (!lt.label && data.kg.truth.contains(t)) {
        throw DataError("negative example (" + lt.triple.head + ", " +
                        lt.triple.rel + ", " + lt.triple.tail +
                        ") is a known positive");
      }
      set.triples.push_back(t);
      set.labels.push_back(lt.label);
    }
    return set;
  };
  data.valid = labeled(valid);
  data.test = labeled(test);
  return data;
}

void augment_reverse(KnowledgeGraph& kg) {
  if (kg.augmented) throw std::logic_error("graph is already reverse-augmented");
  const RelationId m = kg.vocab.num_relations();
  for (RelationId r = 0; r < m; ++r) kg.vocab.add_reverse(r);
  auto reversed = [&](const Triple& t) {
    return Triple{t.tail, *kg.vocab.reverse_of(t.rel), t.head};
  };
  for (auto* split : {&kg.train, &kg.valid}) {
    const std::size_t size = split->size();
    split->reserve(2 * size);
    for (std::size_t i = 0; i < size; ++i) split->push_back(reversed((*split)[i]));
  }
  for (const auto* split : {&kg.train, &kg.valid, &kg.test}) {
    for (const auto& t : *split) kg.truth.insert(reversed(t));
  }
  kg.augmented = true;
}

BernStats compute_bern_stats(std::span<const Triple> train,
                             std::int32_t num_relations) {
  if (train.empty()) throw std::invalid_argument("bern stats need training triples");
  struct Acc {
    std::set<std::pair<EntityId, EntityId>> pairs;
    std::unordered_set<EntityId> heads, tails;
  };
  std::vector<Acc> acc(static_cast<std::size_t>(num_relations));
  for (const auto& t : train) {
    auto& a = acc.at(t.rel);
    a.pairs.emplace(t.head, t.tail);
    a.heads.insert(t.head);
    a.tails.insert(t.tail);
  }
  BernStats stats;
  stats.per_relation.resize(acc.size());
  for (std::size_t r = 0; r < acc.size(); ++r) {
    if (acc[r].pairs.empty()) continue;
    const double pairs = static_cast<double>(acc[r].pairs.size());
    stats.per_relation[r] = RelationBern{pairs / acc[r].heads.size(),
                                         pairs / acc[r].tails.size()};
  }
  return stats;
}

std::string_view to_string(SamplingMode mode) {
  return mode == SamplingMode::kUniform ? "unif" : "bern";
}

SamplingMode parse_sampling_mode(std::string_view s) {
  if (s == "unif") return SamplingMode::kUniform;
  if (s == "bern") return SamplingMode::kBernoulli;
  throw std::invalid_argument("unknown sampling mode '" + std::string(s) +
                              "' (expected unif or bern)");
}

NegativeSample sample_negative(const Triple& triple, SamplingMode mode,
                               std::int32_t num_entities,
                               const TruthIndex& truth, const BernStats* bern,
                               Rng& rng) {
  if (num_entities < 2) throw std::invalid_argument("need at least two entities");
  bool corrupt_head = false;
  if (mode == SamplingMode::kBernoulli) {
    if (bern == nullptr) throw std::invalid_argument("bern sampling needs BernStats");
    const auto& rs = bern->per_relation.at(triple.rel);
    const double p = rs ? rs->head_probability() : 0.5;
    corrupt_head = rng.uniform() < p;
  }
  const EntityId current = corrupt_head ? triple.head : triple.tail;
  NegativeSample out{triple, true};
  for (int attempt = 0; attempt < kMaxNegativeRetries; ++attempt) {
    // Draw from the n-1 entities other than the current one.
    auto e = static_cast<EntityId>(rng.below(static_cast<std::uint64_t>(num_entities - 1)));
    if (e >= current) ++e;
    Triple cand = triple;
    (corrupt_head ? cand.head : cand.tail) = e;
    out.triple = cand;
    if (!truth.contains(cand)) {
      out.exhausted = false;
      return out;
    }
  }
  return out;
}

}  // namespace kgadv

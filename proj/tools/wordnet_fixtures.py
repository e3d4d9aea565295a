#!/usr/bin/env python3
# Copyright 2026 The kgadv Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds the desk-scale WordNet fixtures used by the acceptance suite.

Reads a WordNet database directory (data.noun, data.verb, ...) and writes

  wn18rr_desk/{train,valid,test}.txt   link-prediction subset restricted to
                                       the eleven WN18RR relation types
  wn11_desk/{train,valid,test}.txt     triple-classification subset over
                                       the eleven WN11 relation types;
                                       valid/test carry a "1"/"-1" label

Both subsets are induced subgraphs grown breadth-first from a seeded start
synset so that entities have more than one incident edge. Every entity in
valid/test also occurs in train.

Usage: wordnet_fixtures.py WORDNET_DICT_DIR OUT_DIR [--seed N]
"""

import argparse
import collections
import os
import random

WN18RR_RELATIONS = {
    "@": "_hypernym",
    "@i": "_instance_hypernym",
    "%m": "_member_meronym",
    "%p": "_has_part",
    "+": "_derivationally_related_form",
    ";c": "_synset_domain_topic_of",
    ";r": "_member_of_domain_region",
    ";u": "_member_of_domain_usage",
    "^": "_also_see",
    "$": "_verb_group",
    "&": "_similar_to",
}

WN11_RELATIONS = {
    "@": "_type_of",
    "~i": "_has_instance",
    "@i": "_subordinate_instance_of",
    "%m": "_member_meronym",
    "#m": "_member_holonym",
    "#p": "_part_of",
    "%p": "_has_part",
    ";r": "_domain_region",
    ";c": "_synset_domain_topic",
    "-c": "_domain_topic",
    "&": "_similar_to",
}


def parse_wordnet(dict_dir, parts):
    """Yields (src_id, src_lemma, symbol, dst_id) for every pointer."""
    for pos in parts:
        with open(os.path.join(dict_dir, "data." + pos), encoding="latin-1") as f:
            for line in f:
                if line.startswith(" "):
                    continue
                fields = line.split(" | ")[0].split()
                offset, ss_type = fields[0], fields[2]
                w_cnt = int(fields[3], 16)
                lemma = fields[4].split("(")[0].lower()
                i = 4 + 2 * w_cnt
                p_cnt = int(fields[i])
                i += 1
                src = offset + "-" + ("a" if ss_type == "s" else ss_type)
                for _ in range(p_cnt):
                    sym, dst_off, dst_pos = fields[i], fields[i + 1], fields[i + 2]
                    i += 4
                    dst = dst_off + "-" + ("a" if dst_pos == "s" else dst_pos)
                    yield src, lemma, sym, dst


def collect(dict_dir, parts, relations):
    triples = set()
    lemmas = {}
    for src, lemma, sym, dst in parse_wordnet(dict_dir, parts):
        lemmas[src] = lemma
        if sym in relations and src != dst:
            triples.add((src, relations[sym], dst))
    return sorted(triples), lemmas


def grow_subgraph(triples, target, rng):
    """Breadth-first induced subgraph with at least `target` triples."""
    adj = collections.defaultdict(list)
    for tr in triples:
        adj[tr[0]].append(tr)
        adj[tr[2]].append(tr)
    nodes = sorted(adj)
    # start from a well-connected synset
    start = rng.choice([n for n in nodes if len(adj[n]) >= 8])
    seen = {start}
    queue = collections.deque([start])
    picked = set()
    while queue and len(picked) < target:
        node = queue.popleft()
        for h, r, t in adj[node]:
            other = t if h == node else h
            if other not in seen:
                seen.add(other)
                queue.append(other)
            if h in seen and t in seen:
                picked.add((h, r, t))
    return sorted(picked)


def split(triples, n_valid, n_test, rng):
    triples = list(triples)
    rng.shuffle(triples)
    degree = collections.Counter()
    for h, _, t in triples:
        degree[h] += 1
        degree[t] += 1
    held = {"valid": [], "test": []}
    train = []
    for tr in triples:
        h, _, t = tr
        want = "test" if len(held["test"]) < n_test else (
            "valid" if len(held["valid"]) < n_valid else None)
        if want and degree[h] > 1 and degree[t] > 1 and h != t:
            degree[h] -= 1
            degree[t] -= 1
            held[want].append(tr)
        else:
            train.append(tr)
    return train, held["valid"], held["test"]


def corrupt(triple, slot_pool, truth, rng):
    h, r, t = triple
    for _ in range(1000):
        if rng.random() < 0.5:
            cand = (rng.choice(slot_pool[(r, 0)]), r, t)
        else:
            cand = (h, r, rng.choice(slot_pool[(r, 2)]))
        if cand not in truth:
            return cand
    raise RuntimeError("no corruption for %r" % (triple,))


def write(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write("\t".join(row) + "\n")


def build_wn18rr(dict_dir, out_dir, rng):
    triples, _ = collect(dict_dir, ["noun", "verb", "adj", "adv"],
                         WN18RR_RELATIONS)
    sub = grow_subgraph(triples, 6000, rng)
    rng.shuffle(sub)
    train, valid, test = split(sub[:6000], 500, 500, rng)
    os.makedirs(out_dir, exist_ok=True)
    write(os.path.join(out_dir, "train.txt"), train)
    write(os.path.join(out_dir, "valid.txt"), valid)
    write(os.path.join(out_dir, "test.txt"), test)
    ents = {h for h, _, _ in sub[:6000]} | {t for _, _, t in sub[:6000]}
    print("wn18rr_desk: %d entities, train %d valid %d test %d" %
          (len(ents), len(train), len(valid), len(test)))


def build_wn11(dict_dir, out_dir, rng):
    raw, lemmas = collect(dict_dir, ["noun"], WN11_RELATIONS)
    name = lambda s: "__%s_%s" % (lemmas.get(s, "x"), s.split("-")[0])
    triples = sorted({(name(h), r, name(t)) for h, r, t in raw})
    sub = grow_subgraph(triples, 12000, rng)
    rng.shuffle(sub)
    sub = sub[:12000]
    train, valid, test = split(sub, 1000, 1000, rng)
    truth = set(triples)
    slot_pool = collections.defaultdict(set)
    for h, r, t in sub:
        slot_pool[(r, 0)].add(h)
        slot_pool[(r, 2)].add(t)
    slot_pool = {k: sorted(v) for k, v in slot_pool.items()}
    train_ents = {h for h, _, _ in train} | {t for _, _, t in train}
    for key, pool in slot_pool.items():
        pool[:] = [e for e in pool if e in train_ents]

    def labeled(rows):
        out = []
        for tr in rows:
            out.append(tr + ("1",))
            out.append(corrupt(tr, slot_pool, truth, rng) + ("-1",))
        return out

    os.makedirs(out_dir, exist_ok=True)
    write(os.path.join(out_dir, "train.txt"), train)
    write(os.path.join(out_dir, "valid.txt"), labeled(valid))
    write(os.path.join(out_dir, "test.txt"), labeled(test))
    ents = {h for h, _, _ in sub} | {t for _, _, t in sub}
    print("wn11_desk: %d entities, train %d valid %d test %d" %
          (len(ents), len(train), 2 * len(valid), 2 * len(test)))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("dict_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=2019)
    args = ap.parse_args()
    build_wn18rr(args.dict_dir, os.path.join(args.out_dir, "wn18rr_desk"),
                 random.Random(args.seed))
    build_wn11(args.dict_dir, os.path.join(args.out_dir, "wn11_desk"),
               random.Random(args.seed + 1))


if __name__ == "__main__":
    main()

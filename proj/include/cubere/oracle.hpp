#pragma once

// Corpus-level diagnostics over gold labels: how many facts survive a
// label -> one-hot scores -> decode roundtrip, and how sparse the qualifier
// cube is with and without pruning.

#include <set>
#include <vector>

#include "cubere/decoder.hpp"
#include "cubere/label_cube.hpp"
#include "cubere/scorer.hpp"

namespace cubere {

struct RoundtripReport {
  std::size_t gold_facts = 0;
  std::size_t recovered = 0;
  std::size_t sentences_with_conflicts = 0;

  double rate() const { return gold_facts ? double(recovered) / double(gold_facts) : 1.0; }

  json to_json() const {
    return json{{"gold_facts", gold_facts},
                {"recovered", recovered},
                {"rate", rate()},
                {"sentences_with_conflicts", sentences_with_conflicts}};
  }
};

inline std::size_t roundtrip_recovered(const Sentence& s, const LabelVocab& vocab, ConflictReport* conflicts = nullptr) {
  const auto table = build_table_labels(s, vocab, conflicts);
  const auto quals = build_qualifier_cells(s, vocab, conflicts);
  const auto decoded = decode_gold(table, quals, vocab);
  std::set<HyperFact> found;
  for (const auto& d : decoded) found.insert(d.fact);
  std::size_t hit = 0;
  for (const auto& f : std::set<HyperFact>(s.facts.begin(), s.facts.end())) hit += found.count(f);
  return hit;
}

inline RoundtripReport oracle_roundtrip(const Corpus& corpus, const LabelVocab& vocab) {
  RoundtripReport r;
  for (const auto& s : corpus) {
    ConflictReport conflicts;
    r.gold_facts += std::set<HyperFact>(s.facts.begin(), s.facts.end()).size();
    r.recovered += roundtrip_recovered(s, vocab, &conflicts);
    if (conflicts.any()) ++r.sentences_with_conflicts;
  }
  return r;
}

// Fraction of gold facts recovered exactly by decoding one-hot gold scores
// over the unpruned cube.
inline double oracle_roundtrip_rate(const Corpus& corpus, const LabelVocab& vocab) {
  return oracle_roundtrip(corpus, vocab).rate();
}

struct SparsityReport {
  int m = kDefaultPruneThreshold;
  std::size_t sentences = 0;
  double unpruned_null_fraction = 0.0;  // mean over sentences
  double pruned_null_fraction = 0.0;    // mean over sentences
  double unpruned_null_fraction_pooled = 0.0;
  double pruned_null_fraction_pooled = 0.0;

  // Growth of the non-null proportion brought by pruning.
  double nonnull_increase() const {
    const double before = 1.0 - unpruned_null_fraction;
    return before > 0 ? (1.0 - pruned_null_fraction) / before : 0.0;
  }

  json to_json() const {
    return json{{"m", m},
                {"sentences", sentences},
                {"unpruned_null_fraction", unpruned_null_fraction},
                {"pruned_null_fraction", pruned_null_fraction},
                {"unpruned_null_fraction_pooled", unpruned_null_fraction_pooled},
                {"pruned_null_fraction_pooled", pruned_null_fraction_pooled},
                {"nonnull_increase", nonnull_increase()}};
  }
};

// Pruning ranks words by their gold diagonal label (Entity first, ties to
// the lower index), standing in for a perfect entity scorer.
inline SparsityReport qualifier_sparsity(const Corpus& corpus, const LabelVocab& vocab, int m) {
  SparsityReport r;
  r.m = m;
  double sum_unpruned = 0.0, sum_pruned = 0.0;
  double cells_all = 0.0, nonnull_all = 0.0, cells_pruned = 0.0, nonnull_pruned = 0.0;
  for (const auto& s : corpus) {
    const int n = s.size();
    const auto table = build_table_labels(s, vocab);
    const auto quals = build_qualifier_cells(s, vocab);
    std::vector<double> scores(n);
    for (int w = 0; w < n; ++w) scores[w] = table.at(w, w) == LabelVocab::kEntity ? 1.0 : 0.0;
    const auto pruned = prune_indices(scores, m);
    const double full = double(n) * n * n;
    const double kept_cells = double(pruned.size()) * pruned.size() * pruned.size();
    std::size_t kept_nonnull = 0;
    for (const auto& c : quals.cells)
      if (pruned.local(c.i) && pruned.local(c.j) && pruned.local(c.k)) ++kept_nonnull;
    sum_unpruned += 1.0 - double(quals.cells.size()) / full;
    sum_pruned += 1.0 - double(kept_nonnull) / kept_cells;
    cells_all += full;
    nonnull_all += double(quals.cells.size());
    cells_pruned += kept_cells;
    nonnull_pruned += double(kept_nonnull);
  }
  r.sentences = corpus.size();
  if (r.sentences) {
    r.unpruned_null_fraction = sum_unpruned / double(r.sentences);
    r.pruned_null_fraction = sum_pruned / double(r.sentences);
    r.unpruned_null_fraction_pooled = 1.0 - nonnull_all / cells_all;
    r.pruned_null_fraction_pooled = 1.0 - nonnull_pruned / cells_pruned;
  }
  return r;
}

}  // namespace cubere

#pragma once

// Fact reconstruction from table and qualifier scores.
//
// Non-null qualifier cells (argmax != null) are visited in lexicographic
// (i, j, k) order over original word indices. A cell joins the first group
// it is adjacent to, growing that group's spans, or opens a new group.
// Cell (i, j, k) is adjacent to spans [i1,i2) x [j1,j2) x [k1,k2) when
// i in [i1-1, i2], j in [j1-1, j2] and k in [k1-1, k2].
//
// Each group yields one fact: the relation is the argmax over relation
// labels of the table probabilities averaged over head x tail cells, and the
// qualifier is the argmax over qualifier labels of the member cells'
// averaged probabilities.

#include <algorithm>
#include <vector>

#include "cubere/dataset.hpp"
#include "cubere/label_cube.hpp"
#include "cubere/scorer.hpp"

namespace cubere {

struct FactGroup {
  Span head, tail, value;
  std::vector<std::size_t> members;  // indices into the candidate cell list

  bool adjacent(int i, int j, int k) const {
    return i >= head.start - 1 && i <= head.end && j >= tail.start - 1 && j <= tail.end && k >= value.start - 1 &&
           k <= value.end;
  }

  void merge(int i, int j, int k) {
    head = Span{std::min(head.start, i), std::max(head.end, i + 1)};
    tail = Span{std::min(tail.start, j), std::max(tail.end, j + 1)};
    value = Span{std::min(value.start, k), std::max(value.end, k + 1)};
  }
};

struct DecodedFact {
  HyperFact fact;
  double relation_confidence = 0.0;
  double qualifier_confidence = 0.0;

  bool operator==(const DecodedFact&) const = default;
};

struct DecodeThresholds {
  double relation = 0.0;
  double qualifier = 0.0;
};

// A non-null qualifier cell in original coordinates, carrying its full
// probability vector over Y^q.
struct CandidateCell {
  int i = 0, j = 0, k = 0;
  std::vector<double> probs;
};

// Streams lexicographically sorted candidates into groups.
inline std::vector<FactGroup> group_cells(const std::vector<CandidateCell>& cells) {
  std::vector<FactGroup> groups;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    bool placed = false;
    for (auto& g : groups) {
      if (g.adjacent(cell.i, cell.j, cell.k)) {
        g.merge(cell.i, cell.j, cell.k);
        g.members.push_back(c);
        placed = true;
        break;
      }
    }
    if (!placed)
      groups.push_back(FactGroup{Span{cell.i, cell.i + 1}, Span{cell.j, cell.j + 1}, Span{cell.k, cell.k + 1}, {c}});
  }
  return groups;
}

// `table_probs(i, j)` returns the probability row of table cell (i, j).
template <typename TableFn>
std::vector<DecodedFact> decode_candidates(const std::vector<CandidateCell>& cells, TableFn&& table_probs,
                                           int table_labels, const LabelVocab& vocab,
                                           const DecodeThresholds& thresholds = {}) {
  std::vector<DecodedFact> out;
  if (table_labels <= LabelVocab::kRelationOffset) return out;
  for (const auto& g : group_cells(cells)) {
    std::vector<double> rel(table_labels, 0.0);
    for (int i = g.head.start; i < g.head.end; ++i)
      for (int j = g.tail.start; j < g.tail.end; ++j) {
        const auto row = table_probs(i, j);
        for (int c = 0; c < table_labels; ++c) rel[c] += double(row(c));
      }
    const double box = double(g.head.length()) * g.tail.length();
    for (auto& v : rel) v /= box;

    const int q_labels = static_cast<int>(cells[g.members.front()].probs.size());
    std::vector<double> qual(q_labels, 0.0);
    for (std::size_t m : g.members)
      for (int c = 0; c < q_labels; ++c) qual[c] += cells[m].probs[c];
    for (auto& v : qual) v /= double(g.members.size());

    const int r = static_cast<int>(std::max_element(rel.begin() + LabelVocab::kRelationOffset, rel.end()) - rel.begin());
    const int q =
        static_cast<int>(std::max_element(qual.begin() + LabelVocab::kQualifierOffset, qual.end()) - qual.begin());
    DecodedFact f{HyperFact{g.head, vocab.relation_name(r), g.tail, vocab.qualifier_name(q), g.value}, rel[r], qual[q]};
    if (f.relation_confidence >= thresholds.relation && f.qualifier_confidence >= thresholds.qualifier)
      out.push_back(std::move(f));
  }
  return out;
}

// Non-null cells of a pruned qualifier cube, mapped back to original
// indices. The map is monotone, so local lexicographic order carries over.
template <typename T>
std::vector<CandidateCell> nonnull_cells(const QualifierScores<T>& quals) {
  std::vector<CandidateCell> cells;
  const int m = quals.size();
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c) {
        const auto row = quals.at(a, b, c);
        if (argmax_range(row, 0, quals.labels()) == LabelVocab::kNull) continue;
        CandidateCell cell{quals.pruned.original(a), quals.pruned.original(b), quals.pruned.original(c), {}};
        cell.probs.resize(quals.labels());
        for (int q = 0; q < quals.labels(); ++q) cell.probs[q] = double(row(q));
        cells.push_back(std::move(cell));
      }
  return cells;
}

template <typename T>
std::vector<DecodedFact> decode(const TableScores<T>& table, const QualifierScores<T>& quals, const LabelVocab& vocab,
                                const DecodeThresholds& thresholds = {}) {
  return decode_candidates(
      nonnull_cells(quals), [&](int i, int j) { return table.at(i, j); }, table.labels(), vocab, thresholds);
}

// Decodes one-hot scores built directly from gold labels over the full,
// unpruned cube, without materialising any dense tensor.
inline std::vector<DecodedFact> decode_gold(const TableLabels& table, const QualifierCells& quals,
                                            const LabelVocab& vocab) {
  const int q_labels = vocab.num_qualifier_labels();
  const int t_labels = vocab.num_table_labels();
  std::vector<CandidateCell> cells;
  cells.reserve(quals.cells.size());
  for (const auto& c : quals.cells) {
    CandidateCell cell{c.i, c.j, c.k, std::vector<double>(q_labels, 0.0)};
    cell.probs[c.label] = 1.0;
    cells.push_back(std::move(cell));
  }
  RowVec<double> onehot(t_labels);
  return decode_candidates(
      cells,
      [&](int i, int j) {
        onehot.setZero();
        onehot(table.at(i, j)) = 1.0;
        return onehot;
      },
      t_labels, vocab);
}

inline json decoded_to_json(const DecodedFact& d) {
  return json{{"head", detail::span_json(d.fact.head)},
              {"relation", d.fact.relation},
              {"tail", detail::span_json(d.fact.tail)},
              {"qualifier", d.fact.qualifier},
              {"value", detail::span_json(d.fact.value)},
              {"relation_confidence", d.relation_confidence},
              {"qualifier_confidence", d.qualifier_confidence}};
}

// One prediction line: the sentence tokens plus decoded facts. Readable by
// the corpus loader, which ignores the confidence fields.
inline json prediction_to_json(const std::vector<std::string>& tokens, const std::vector<DecodedFact>& facts) {
  json out = json::array();
  for (const auto& f : facts) out.push_back(decoded_to_json(f));
  return json{{"tokens", tokens}, {"facts", std::move(out)}};
}

inline std::vector<HyperFact> facts_of(const std::vector<DecodedFact>& decoded) {
  std::vector<HyperFact> out;
  out.reserve(decoded.size());
  for (const auto& d : decoded) out.push_back(d.fact);
  return out;
}

}  // namespace cubere

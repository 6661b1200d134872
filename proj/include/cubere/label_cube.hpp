#pragma once

// Gold supervision targets: the n x n entity-relation table and the sparse
// n x n x n qualifier cube. Every fact labels the full Cartesian product of
// its span words. When two facts claim one cell with different labels, the
// fact listed first keeps it.

#include <algorithm>
#include <cstddef>
#include <map>
#include <tuple>
#include <vector>

#include "cubere/dataset.hpp"

namespace cubere {

inline constexpr int kDefaultDenseCubeBound = 128;

struct TableLabels {
  int n = 0;
  std::vector<int> grid;  // row-major, rows = head words, columns = tail words

  TableLabels() = default;
  explicit TableLabels(int n_) : n(n_), grid(static_cast<std::size_t>(n_) * n_, LabelVocab::kNull) {}

  int& at(int i, int j) { return grid[static_cast<std::size_t>(i) * n + j]; }
  int at(int i, int j) const { return grid[static_cast<std::size_t>(i) * n + j]; }
  bool operator==(const TableLabels&) const = default;
};

struct QualifierCell {
  int i = 0, j = 0, k = 0;
  int label = 0;

  auto coords() const { return std::tie(i, j, k); }
  auto operator<=>(const QualifierCell&) const = default;
};

struct QualifierCells {
  int n = 0;
  std::vector<QualifierCell> cells;  // sorted by (i, j, k), label != null

  bool operator==(const QualifierCells&) const = default;
};

// Cells that a later fact tried to relabel.
struct ConflictReport {
  std::size_t table_conflicts = 0;
  std::size_t qualifier_conflicts = 0;

  bool any() const { return table_conflicts + qualifier_conflicts > 0; }
};

inline TableLabels build_table_labels(const Sentence& s, const LabelVocab& vocab, ConflictReport* report = nullptr) {
  TableLabels t(s.size());
  for (const auto& f : s.facts) {
    for (const Span* sp : {&f.head, &f.tail, &f.value})
      for (int w = sp->start; w < sp->end; ++w) t.at(w, w) = LabelVocab::kEntity;
  }
  for (const auto& f : s.facts) {
    const int label = vocab.table_label(f.relation);
    for (int i = f.head.start; i < f.head.end; ++i)
      for (int j = f.tail.start; j < f.tail.end; ++j) {
        if (i == j) continue;  // diagonal holds entity labels only
        int& cell = t.at(i, j);
        if (cell == LabelVocab::kNull)
          cell = label;
        else if (cell != label && report)
          ++report->table_conflicts;
      }
  }
  return t;
}

inline QualifierCells build_qualifier_cells(const Sentence& s, const LabelVocab& vocab,
                                            ConflictReport* report = nullptr) {
  std::map<std::tuple<int, int, int>, int> claimed;
  for (const auto& f : s.facts) {
    const int label = vocab.qualifier_label(f.qualifier);
    for (int i = f.head.start; i < f.head.end; ++i)
      for (int j = f.tail.start; j < f.tail.end; ++j)
        for (int k = f.value.start; k < f.value.end; ++k) {
          auto [it, inserted] = claimed.emplace(std::make_tuple(i, j, k), label);
          if (!inserted && it->second != label && report) ++report->qualifier_conflicts;
        }
  }
  QualifierCells out;
  out.n = s.size();
  out.cells.reserve(claimed.size());
  for (const auto& [c, label] : claimed)
    out.cells.push_back(QualifierCell{std::get<0>(c), std::get<1>(c), std::get<2>(c), label});
  return out;
}

// Dense n^3 label cube, index (i * n + j) * n + k. Refuses sentences longer
// than `bound` to keep memory in check.
inline std::vector<int> dense_qualifier_cube(const QualifierCells& q, int bound = kDefaultDenseCubeBound) {
  if (q.n > bound)
    throw ConfigError("dense qualifier cube requested for n=" + std::to_string(q.n) + " above bound " +
                      std::to_string(bound));
  const std::size_t n = static_cast<std::size_t>(q.n);
  std::vector<int> cube(n * n * n, LabelVocab::kNull);
  for (const auto& c : q.cells) cube[(c.i * n + c.j) * n + c.k] = c.label;
  return cube;
}

inline json cells_to_json(const TableLabels& t, const QualifierCells& q) {
  json table = json::array();
  for (int i = 0; i < t.n; ++i)
    for (int j = 0; j < t.n; ++j)
      if (t.at(i, j) != LabelVocab::kNull) table.push_back(json::array({i, j, t.at(i, j)}));
  json cube = json::array();
  for (const auto& c : q.cells) cube.push_back(json::array({c.i, c.j, c.k, c.label}));
  return json{{"n", t.n}, {"table", std::move(table)}, {"qualifiers", std::move(cube)}};
}

}  // namespace cubere

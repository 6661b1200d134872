#pragma once

// Negative log-likelihood objectives for the table and the pruned qualifier
// cube. Each loss optionally writes d(loss)/d(logits), which for softmax
// NLL is (P - onehot) / count.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cubere/label_cube.hpp"
#include "cubere/scorer.hpp"

namespace cubere {

inline constexpr double kProbFloor = 1e-12;

struct LossReport {
  double table = 0.0;
  double qualifier = 0.0;
  double total = 0.0;
  std::size_t dropped_gold_cells = 0;
};

inline double total_loss(double table, double qualifier) { return table + qualifier; }

namespace detail {
template <typename T>
double nll(T p) {
  return -std::log(std::max(double(p), kProbFloor));
}
}  // namespace detail

// Mean over valid (i, j) cells of -log P(gold). A cell is valid when both
// of its words are valid; with no mask every cell counts.
template <typename T>
double table_loss(const TableScores<T>& scores, const TableLabels& gold, const std::vector<bool>* valid = nullptr,
                  Mat<T>* d_logits = nullptr) {
  if (gold.n != scores.n) throw ConfigError("table gold size does not match scores");
  const int n = scores.n;
  const int labels = scores.labels();
  auto is_valid = [&](int w) { return !valid || (*valid)[w]; };
  std::size_t count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (is_valid(i) && is_valid(j)) ++count;
  if (d_logits) *d_logits = Mat<T>::Zero(scores.probs.rows(), scores.probs.cols());
  if (count == 0) return 0.0;
  double sum = 0.0;
  const T scale = T(1) / static_cast<T>(count);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!is_valid(i) || !is_valid(j)) continue;
      const int y = gold.at(i, j);
      if (y < 0 || y >= labels)
        throw LabelError("table gold label " + std::to_string(y) + " outside [0, " + std::to_string(labels) + ")");
      const auto row = scores.at(i, j);
      sum += detail::nll(row(y));
      if (d_logits) {
        auto d = d_logits->row(static_cast<Eigen::Index>(i) * n + j);
        d = row * scale;
        d(y) -= scale;
      }
    }
  return sum / double(count);
}

// Gold qualifier cells restated in pruned-local coordinates.
struct ProjectedQualifierGold {
  int m = 0;
  std::vector<QualifierCell> cells;
  std::size_t dropped = 0;  // gold cells with a coordinate outside the pruned set
};

inline ProjectedQualifierGold project_gold(const QualifierCells& gold, const PrunedIndexSet& pruned) {
  ProjectedQualifierGold out;
  out.m = pruned.size();
  for (const auto& c : gold.cells) {
    auto a = pruned.local(c.i), b = pruned.local(c.j), k = pruned.local(c.k);
    if (!a || !b || !k) {
      ++out.dropped;
      continue;
    }
    out.cells.push_back(QualifierCell{*a, *b, *k, c.label});
  }
  return out;
}

// Mean over all m'^3 pruned cells of -log P(gold); cells without a
// projected gold label are gold-null.
template <typename T>
double qualifier_loss(const QualifierScores<T>& scores, const ProjectedQualifierGold& gold, Mat<T>* d_logits = nullptr) {
  if (gold.m != scores.size()) throw ConfigError("projected gold does not match pruned cube size");
  const int labels = scores.labels();
  const Eigen::Index cells = scores.probs.rows();
  if (d_logits) *d_logits = Mat<T>::Zero(scores.probs.rows(), scores.probs.cols());
  if (cells == 0) return 0.0;
  std::vector<int> target(static_cast<std::size_t>(cells), LabelVocab::kNull);
  for (const auto& c : gold.cells) {
    if (c.label < 0 || c.label >= labels) throw LabelError("qualifier gold label out of range");
    target[scores.row_index(c.i, c.j, c.k)] = c.label;
  }
  double sum = 0.0;
  const T scale = T(1) / static_cast<T>(cells);
  for (Eigen::Index r = 0; r < cells; ++r) sum += detail::nll(scores.probs(r, target[r]));
  if (d_logits) {
    *d_logits = scores.probs * scale;
    for (Eigen::Index r = 0; r < cells; ++r) (*d_logits)(r, target[r]) -= scale;
  }
  return sum / double(cells);
}

// Adds every word of every gold span to the pruned set (the
// `union-gold-indices` training option).
inline PrunedIndexSet with_gold_indices(const PrunedIndexSet& pruned, const Sentence& s) {
  std::set<int> merged(pruned.indices.begin(), pruned.indices.end());
  for (const auto& f : s.facts)
    for (const Span* sp : {&f.head, &f.tail, &f.value})
      for (int w = sp->start; w < sp->end; ++w) merged.insert(w);
  return PrunedIndexSet{{merged.begin(), merged.end()}, pruned.m};
}

}  // namespace cubere

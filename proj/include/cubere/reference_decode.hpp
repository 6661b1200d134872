#pragma once

// Brute-force decoder used as an oracle for `decode`. It walks every cell of
// a dense n^3 argmax cube with plain nested loops, scans groups linearly and
// averages scores with explicit loops. Meant for small n only.

#include <vector>

#include "cubere/decoder.hpp"

namespace cubere {

inline constexpr int kReferenceDecodeMaxN = 16;

// Dense argmax cube in original coordinates, index (i * n + j) * n + k.
// Cells outside the pruned set are null.
template <typename T>
std::vector<int> argmax_cube(const QualifierScores<T>& quals, int n) {
  std::vector<int> cube(static_cast<std::size_t>(n) * n * n, 0);
  const int m = quals.size();
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c) {
        const auto row = quals.at(a, b, c);
        int best = 0;
        for (int q = 1; q < quals.labels(); ++q)
          if (row(q) > row(best)) best = q;
        const int i = quals.pruned.indices[a], j = quals.pruned.indices[b], k = quals.pruned.indices[c];
        cube[(static_cast<std::size_t>(i) * n + j) * n + k] = best;
      }
  return cube;
}

template <typename T>
std::vector<DecodedFact> reference_decode(const std::vector<int>& cube, const TableScores<T>& table,
                                          const QualifierScores<T>& quals, const LabelVocab& vocab) {
  const int n = table.n;
  if (n > kReferenceDecodeMaxN) throw ConfigError("reference_decode is limited to n <= 16");
  if (cube.size() != static_cast<std::size_t>(n) * n * n) throw ConfigError("argmax cube size mismatch");

  // Original index -> pruned-local index, by linear search.
  auto local_of = [&](int original) {
    for (int a = 0; a < quals.size(); ++a)
      if (quals.pruned.indices[a] == original) return a;
    return -1;
  };

  struct Group {
    int i1, i2, j1, j2, k1, k2;
    std::vector<std::vector<int>> cells;
  };
  std::vector<Group> groups;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        if (cube[(static_cast<std::size_t>(i) * n + j) * n + k] == 0) continue;
        int found = -1;
        for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
          const Group& gr = groups[g];
          if (gr.i1 - 1 <= i && i <= gr.i2 && gr.j1 - 1 <= j && j <= gr.j2 && gr.k1 - 1 <= k && k <= gr.k2) {
            found = g;
            break;
          }
        }
        if (found < 0) {
          groups.push_back(Group{i, i + 1, j, j + 1, k, k + 1, {{i, j, k}}});
        } else {
          Group& gr = groups[found];
          if (i < gr.i1) gr.i1 = i;
          if (i + 1 > gr.i2) gr.i2 = i + 1;
          if (j < gr.j1) gr.j1 = j;
          if (j + 1 > gr.j2) gr.j2 = j + 1;
          if (k < gr.k1) gr.k1 = k;
          if (k + 1 > gr.k2) gr.k2 = k + 1;
          gr.cells.push_back({i, j, k});
        }
      }

  std::vector<DecodedFact> facts;
  for (const Group& gr : groups) {
    const int t_labels = table.labels();
    int best_r = LabelVocab::kRelationOffset;
    double best_r_score = -1.0;
    for (int r = LabelVocab::kRelationOffset; r < t_labels; ++r) {
      double total = 0.0;
      int count = 0;
      for (int i = gr.i1; i < gr.i2; ++i)
        for (int j = gr.j1; j < gr.j2; ++j) {
          total += double(table.probs(static_cast<Eigen::Index>(i) * n + j, r));
          ++count;
        }
      const double mean = total / count;
      if (mean > best_r_score) {
        best_r_score = mean;
        best_r = r;
      }
    }
    int best_q = LabelVocab::kQualifierOffset;
    double best_q_score = -1.0;
    for (int q = LabelVocab::kQualifierOffset; q < quals.labels(); ++q) {
      double total = 0.0;
      for (const auto& cell : gr.cells) {
        const int a = local_of(cell[0]), b = local_of(cell[1]), c = local_of(cell[2]);
        total += double(quals.probs(quals.row_index(a, b, c), q));
      }
      const double mean = total / double(gr.cells.size());
      if (mean > best_q_score) {
        best_q_score = mean;
        best_q = q;
      }
    }
    facts.push_back(DecodedFact{HyperFact{Span{gr.i1, gr.i2}, vocab.relation_name(best_r), Span{gr.j1, gr.j2},
                                          vocab.qualifier_name(best_q), Span{gr.k1, gr.k2}},
                                best_r_score, best_q_score});
  }
  return facts;
}

}  // namespace cubere

#include <gtest/gtest.h>

#include <cmath>

#include "cubere/losses.hpp"

using namespace cubere;

TEST(TableLoss, OneHotIsZero) {
  TableScores<double> t{2, Mat<double>::Zero(4, 3)};
  TableLabels gold(2);
  gold.grid = {1, 2, 0, 1};
  for (int c = 0; c < 4; ++c) t.probs(c, gold.grid[c]) = 1.0;
  EXPECT_LE(table_loss(t, gold), -std::log(1.0 - kProbFloor) + 1e-15);
  EXPECT_GE(table_loss(t, gold), 0.0);
}

TEST(TableLoss, UniformIsLogLabels) {
  TableScores<double> t{3, Mat<double>::Constant(9, 64, 1.0 / 64)};
  TableLabels gold(3);
  gold.grid = {5, 0, 63, 1, 1, 2, 0, 0, 9};
  EXPECT_NEAR(table_loss(t, gold), std::log(64.0), 1e-12);
  EXPECT_NEAR(table_loss(t, gold), 4.1589, 1e-4);
}

TEST(TableLoss, HandComputedTwoByTwo) {
  TableScores<double> t{2, Mat<double>(4, 3)};
  t.probs << 0.7, 0.2, 0.1,  //
      0.1, 0.6, 0.3,         //
      0.5, 0.25, 0.25,       //
      0.0, 0.0, 1.0;
  TableLabels gold(2);
  gold.grid = {0, 2, 1, 0};
  const double expected = (-std::log(0.7) - std::log(0.3) - std::log(0.25) - std::log(1e-12)) / 4.0;
  EXPECT_NEAR(table_loss(t, gold), expected, 1e-12);
  // The mask drops cells whose row or column word is invalid.
  const std::vector<bool> valid{true, false};
  EXPECT_NEAR(table_loss(t, gold, &valid), -std::log(0.7), 1e-12);
}

TEST(TableLoss, GradientIsScaledResidual) {
  TableScores<double> t{1, Mat<double>(1, 3)};
  t.probs << 0.2, 0.5, 0.3;
  TableLabels gold(1);
  gold.grid = {1};
  Mat<double> d;
  table_loss(t, gold, nullptr, &d);
  EXPECT_NEAR(d(0, 0), 0.2, 1e-15);
  EXPECT_NEAR(d(0, 1), -0.5, 1e-15);
  EXPECT_NEAR(d(0, 2), 0.3, 1e-15);
}

TEST(QualifierLoss, UniformIsLogLabels) {
  QualifierScores<double> q{all_indices(3), Mat<double>::Constant(27, 45, 1.0 / 45)};
  QualifierCells gold;
  gold.n = 3;
  gold.cells = {{0, 1, 2, 7}, {2, 2, 2, 44}};
  EXPECT_NEAR(qualifier_loss(q, project_gold(gold, q.pruned)), std::log(45.0), 1e-12);
  EXPECT_NEAR(std::log(45.0), 3.8067, 1e-4);
}

TEST(QualifierLoss, SingleCorrectCellIsZero) {
  QualifierScores<double> q{all_indices(1), Mat<double>(1, 2)};
  q.probs << 0.0, 1.0;
  QualifierCells gold;
  gold.n = 1;
  gold.cells = {{0, 0, 0, 1}};
  EXPECT_NEAR(qualifier_loss(q, project_gold(gold, q.pruned)), 0.0, 1e-12);
}

TEST(QualifierLoss, HandComputedEightCells) {
  // m' = 2, pruned original indices {1, 3}; gold at local (0,1,1) and (1,0,0).
  PrunedIndexSet pruned{{1, 3}, 2};
  QualifierScores<double> q{pruned, Mat<double>(8, 3)};
  std::vector<double> expected_terms;
  for (int r = 0; r < 8; ++r) {
    const double a = 0.1 + 0.05 * r;
    q.probs.row(r) << a, (1 - a) * 0.25, (1 - a) * 0.75;
  }
  QualifierCells gold;
  gold.n = 5;
  gold.cells = {{1, 3, 3, 2}, {3, 1, 1, 1}, {0, 1, 1, 1}};
  const auto projected = project_gold(gold, pruned);
  EXPECT_EQ(projected.dropped, 1u);
  double sum = 0.0;
  for (int r = 0; r < 8; ++r) {
    int label = 0;
    if (r == (0 * 2 + 1) * 2 + 1) label = 2;
    if (r == (1 * 2 + 0) * 2 + 0) label = 1;
    sum += -std::log(q.probs(r, label));
  }
  EXPECT_NEAR(qualifier_loss(q, projected), sum / 8.0, 1e-12);
}

TEST(TotalLoss, IsExactSum) {
  EXPECT_EQ(total_loss(0.0, 0.0), 0.0);
  EXPECT_EQ(total_loss(1.5, 2.25), 3.75);
  EXPECT_NEAR(total_loss(std::log(64.0), std::log(45.0)), 7.9656, 1e-4);
}

TEST(UnionGoldIndices, AddsSpanWords) {
  Sentence s;
  s.tokens = {"a", "b", "c", "d", "e", "f"};
  s.facts = {HyperFact{{0, 2}, "r", {4, 5}, "q", {5, 6}}};
  const auto merged = with_gold_indices(PrunedIndexSet{{2, 4}, 2}, s);
  EXPECT_EQ(merged.indices, (std::vector<int>{0, 1, 2, 4, 5}));
}

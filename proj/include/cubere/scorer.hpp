#pragma once

// The cube-filling scoring head.
//
//   g_ij     = FFN_pair(h_i ++ h_j)               pair representation
//   P_ij     = softmax(W_t g_ij + b_t)            entity/relation table
//   e_i      = P_ii[Entity]                       entity score
//   pruned   = top-m words by e
//   P_i'j'k' = softmax(g_i'j'^T U h_k' + b_q)     qualifier cube on pruned words
//
// Each forward piece has a matching backward that accumulates parameter
// gradients and returns gradients for its inputs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cubere/dataset.hpp"
#include "cubere/encoder.hpp"
#include "cubere/tensor.hpp"

namespace cubere {

inline constexpr int kDefaultPairSize = 150;
inline constexpr int kDefaultPruneThreshold = 20;

enum class EntityScoreMode { EntityProbability, NotNull };
enum class PairActivation { Gelu, Identity };

struct ScorerConfig {
  int pair_hidden = kDefaultPairSize;
  int pair_size = kDefaultPairSize;
  int prune_threshold = kDefaultPruneThreshold;
  EntityScoreMode entity_score = EntityScoreMode::EntityProbability;
  PairActivation activation = PairActivation::Gelu;
  bool qualifier_bias = true;

  void validate() const {
    if (pair_hidden <= 0 || pair_size <= 0) throw ConfigError("pair FFN sizes must be positive");
    if (prune_threshold < 1) throw ConfigError("pruning threshold must be at least 1");
  }

  json to_json() const {
    return json{{"pair_hidden", pair_hidden},
                {"pair_size", pair_size},
                {"prune_threshold", prune_threshold},
                {"entity_score", entity_score == EntityScoreMode::EntityProbability ? "entity" : "not-null"},
                {"activation", activation == PairActivation::Gelu ? "gelu" : "identity"},
                {"qualifier_bias", qualifier_bias}};
  }
  static ScorerConfig from_json(const json& j) {
    ScorerConfig c;
    c.pair_hidden = j.at("pair_hidden").get<int>();
    c.pair_size = j.at("pair_size").get<int>();
    c.prune_threshold = j.at("prune_threshold").get<int>();
    c.entity_score = j.at("entity_score").get<std::string>() == "entity" ? EntityScoreMode::EntityProbability
                                                                         : EntityScoreMode::NotNull;
    c.activation = j.at("activation").get<std::string>() == "gelu" ? PairActivation::Gelu : PairActivation::Identity;
    c.qualifier_bias = j.at("qualifier_bias").get<bool>();
    return c;
  }
};

inline EntityScoreMode parse_entity_score_mode(const std::string& s) {
  if (s == "entity") return EntityScoreMode::EntityProbability;
  if (s == "not-null") return EntityScoreMode::NotNull;
  throw ConfigError("unknown entity score mode: " + s);
}

template <typename T>
struct ScorerParams {
  int d = 0;          // encoder width
  int hidden = 0;     // pair FFN hidden width
  int p = 0;          // pair representation width
  int n_table = 0;    // |Y^t|
  int n_qual = 0;     // |Y^q|
  PairActivation activation = PairActivation::Gelu;

  Parameter<T> pair_in_w;    // hidden x 2d, columns [head half | tail half]
  Parameter<T> pair_in_b;    // 1 x hidden
  Parameter<T> pair_out_w;   // p x hidden
  Parameter<T> pair_out_b;   // 1 x p
  Parameter<T> table_w;      // |Y^t| x p
  Parameter<T> table_b;      // 1 x |Y^t|
  Parameter<T> bilinear;     // (|Y^q| * p) x d; rows [q*p, (q+1)*p) hold U[:, q, :]
  Parameter<T> qualifier_b;  // 1 x |Y^q|, or 0 x 0 when disabled

  static ScorerParams zeros(int d, const ScorerConfig& cfg, int n_table, int n_qual) {
    cfg.validate();
    if (d <= 0 || n_table < 2 || n_qual < 1) throw ConfigError("invalid scorer dimensions");
    ScorerParams s;
    s.d = d;
    s.hidden = cfg.pair_hidden;
    s.p = cfg.pair_size;
    s.n_table = n_table;
    s.n_qual = n_qual;
    s.activation = cfg.activation;
    s.pair_in_w = Parameter<T>("scorer.pair_in.weight", s.hidden, 2 * d);
    s.pair_in_b = Parameter<T>("scorer.pair_in.bias", 1, s.hidden, false);
    s.pair_out_w = Parameter<T>("scorer.pair_out.weight", s.p, s.hidden);
    s.pair_out_b = Parameter<T>("scorer.pair_out.bias", 1, s.p, false);
    s.table_w = Parameter<T>("scorer.table.weight", n_table, s.p);
    s.table_b = Parameter<T>("scorer.table.bias", 1, n_table, false);
    s.bilinear = Parameter<T>("scorer.bilinear.weight", static_cast<Eigen::Index>(n_qual) * s.p, d);
    s.qualifier_b = cfg.qualifier_bias ? Parameter<T>("scorer.bilinear.bias", 1, n_qual, false)
                                       : Parameter<T>("scorer.bilinear.bias", 0, 0, false);
    return s;
  }

  static ScorerParams initialized(int d, const ScorerConfig& cfg, int n_table, int n_qual, std::mt19937_64& rng) {
    ScorerParams s = zeros(d, cfg, n_table, n_qual);
    xavier_uniform(s.pair_in_w.value, rng, 2.0 * d, s.hidden);
    xavier_uniform(s.pair_out_w.value, rng, s.hidden, s.p);
    xavier_uniform(s.table_w.value, rng, s.p, n_table);
    uniform_init(s.bilinear.value, rng, std::sqrt(3.0 / (double(s.p) * d)));
    return s;
  }

  bool has_qualifier_bias() const { return qualifier_b.size() > 0; }

  auto bilinear_block(int q) const { return bilinear.value.middleRows(static_cast<Eigen::Index>(q) * p, p); }

  ParamRefs<T> refs() {
    ParamRefs<T> out{&pair_in_w, &pair_in_b, &pair_out_w, &pair_out_b, &table_w, &table_b, &bilinear};
    if (has_qualifier_bias()) out.push_back(&qualifier_b);
    return out;
  }

  void check_input(int width) const {
    if (width != d)
      throw ConfigError("encoder width " + std::to_string(width) + " does not match scorer width " + std::to_string(d));
  }
};

// n x n grid of pair vectors, row (i * n + j). Keeps the pre-activation for
// the backward pass.
template <typename T>
struct PairRepresentation {
  int n = 0;
  Mat<T> pre;  // n^2 x hidden
  Mat<T> act;  // n^2 x hidden
  Mat<T> g;    // n^2 x p

  auto at(int i, int j) const { return g.row(static_cast<Eigen::Index>(i) * n + j); }
};

template <typename T>
PairRepresentation<T> pair_representation(const EncodedSentence<T>& enc, const ScorerParams<T>& params) {
  params.check_input(enc.d());
  const int n = enc.n();
  const int d = params.d;
  const Mat<T> head = enc.vectors * params.pair_in_w.value.leftCols(d).transpose();  // n x hidden
  const Mat<T> tail = enc.vectors * params.pair_in_w.value.rightCols(d).transpose();
  PairRepresentation<T> out;
  out.n = n;
  out.pre.resize(static_cast<Eigen::Index>(n) * n, params.hidden);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.pre.row(static_cast<Eigen::Index>(i) * n + j) = head.row(i) + tail.row(j) + params.pair_in_b.value;
  if (params.activation == PairActivation::Gelu)
    out.act = out.pre.unaryExpr([](T x) { return gelu(x); });
  else
    out.act = out.pre;
  out.g = out.act * params.pair_out_w.value.transpose();
  out.g.rowwise() += params.pair_out_b.value.row(0);
  return out;
}

template <typename T>
struct TableScores {
  int n = 0;
  Mat<T> probs;  // n^2 x |Y^t|, row (i * n + j)

  int labels() const { return static_cast<int>(probs.cols()); }
  auto at(int i, int j) const { return probs.row(static_cast<Eigen::Index>(i) * n + j); }
  auto at(int i, int j) { return probs.row(static_cast<Eigen::Index>(i) * n + j); }
};

template <typename T>
Mat<T> table_logits(const PairRepresentation<T>& pairs, const ScorerParams<T>& params) {
  Mat<T> logits = pairs.g * params.table_w.value.transpose();
  logits.rowwise() += params.table_b.value.row(0);
  return logits;
}

template <typename T>
TableScores<T> table_scores(const PairRepresentation<T>& pairs, const ScorerParams<T>& params) {
  return TableScores<T>{pairs.n, softmax_rows<T>(table_logits(pairs, params))};
}

// Ranking key per word from its diagonal table cell. Masked-out positions
// score -inf so pruning never selects them.
template <typename T>
std::vector<double> entity_scores(const TableScores<T>& table,
                                  EntityScoreMode mode = EntityScoreMode::EntityProbability,
                                  const std::vector<bool>* valid = nullptr) {
  std::vector<double> scores(table.n);
  for (int i = 0; i < table.n; ++i) {
    if (valid && !(*valid)[i]) {
      scores[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const auto cell = table.at(i, i);
    scores[i] = mode == EntityScoreMode::EntityProbability ? double(cell(LabelVocab::kEntity))
                                                           : 1.0 - double(cell(LabelVocab::kNull));
  }
  return scores;
}

// Original word indices kept by cube pruning, ascending.
struct PrunedIndexSet {
  std::vector<int> indices;
  int m = kDefaultPruneThreshold;

  int size() const { return static_cast<int>(indices.size()); }
  int original(int local) const { return indices[local]; }
  std::optional<int> local(int original_index) const {
    auto it = std::lower_bound(indices.begin(), indices.end(), original_index);
    if (it == indices.end() || *it != original_index) return std::nullopt;
    return static_cast<int>(it - indices.begin());
  }
  bool operator==(const PrunedIndexSet&) const = default;
};

// Top-m positions by score, ties to the lower index; -inf positions are
// never selected.
inline PrunedIndexSet prune_indices(std::span<const double> scores, int m) {
  if (m < 1) throw ConfigError("pruning threshold must be at least 1");
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] != -std::numeric_limits<double>::infinity()) order.push_back(i);
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(m), order.size());
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return PrunedIndexSet{std::move(order), m};
}

inline PrunedIndexSet all_indices(int n) {
  PrunedIndexSet p;
  p.indices.resize(n);
  std::iota(p.indices.begin(), p.indices.end(), 0);
  p.m = std::max(n, 1);
  return p;
}

template <typename T>
struct QualifierScores {
  PrunedIndexSet pruned;
  Mat<T> probs;  // m'^3 x |Y^q|, row (i' * m' + j') * m' + k'

  int size() const { return pruned.size(); }
  int labels() const { return static_cast<int>(probs.cols()); }
  Eigen::Index row_index(int i, int j, int k) const {
    const Eigen::Index m = size();
    return (static_cast<Eigen::Index>(i) * m + j) * m + k;
  }
  auto at(int i, int j, int k) const { return probs.row(row_index(i, j, k)); }
  auto at(int i, int j, int k) { return probs.row(row_index(i, j, k)); }
};

namespace detail {

template <typename T>
Mat<T> gather_pairs(const PairRepresentation<T>& pairs, const PrunedIndexSet& pruned) {
  const int m = pruned.size();
  Mat<T> out(static_cast<Eigen::Index>(m) * m, pairs.g.cols());
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) out.row(static_cast<Eigen::Index>(a) * m + b) = pairs.at(pruned.original(a), pruned.original(b));
  return out;
}

template <typename T>
Mat<T> gather_rows(const Mat<T>& h, const PrunedIndexSet& pruned) {
  Mat<T> out(pruned.size(), h.cols());
  for (int a = 0; a < pruned.size(); ++a) out.row(a) = h.row(pruned.original(a));
  return out;
}

}  // namespace detail

template <typename T>
Mat<T> qualifier_logits(const PairRepresentation<T>& pairs, const EncodedSentence<T>& enc,
                        const PrunedIndexSet& pruned, const ScorerParams<T>& params) {
  params.check_input(enc.d());
  const int m = pruned.size();
  const int labels = params.n_qual;
  const Mat<T> gp = detail::gather_pairs(pairs, pruned);      // m^2 x p
  const Mat<T> hp = detail::gather_rows(enc.vectors, pruned);  // m x d
  const Mat<T> uh = params.bilinear.value * hp.transpose();    // (labels * p) x m
  Mat<T> logits(static_cast<Eigen::Index>(m) * m * m, labels);
  for (int q = 0; q < labels; ++q) {
    const Mat<T> per_label = gp * uh.middleRows(static_cast<Eigen::Index>(q) * params.p, params.p);  // m^2 x m
    const T bias = params.has_qualifier_bias() ? params.qualifier_b.value(0, q) : T(0);
    for (Eigen::Index ab = 0; ab < per_label.rows(); ++ab)
      for (int c = 0; c < m; ++c) logits(ab * m + c, q) = per_label(ab, c) + bias;
  }
  return logits;
}

template <typename T>
QualifierScores<T> qualifier_scores(const PairRepresentation<T>& pairs, const EncodedSentence<T>& enc,
                                    const PrunedIndexSet& pruned, const ScorerParams<T>& params) {
  for (int idx : pruned.indices)
    if (idx < 0 || idx >= pairs.n) throw ConfigError("pruned index out of range");
  return QualifierScores<T>{pruned, softmax_rows<T>(qualifier_logits(pairs, enc, pruned, params))};
}

// ---------------------------------------------------------------------------
// Backward passes. `d_g` is n^2 x p, `d_h` is n x d; both accumulate.

template <typename T>
void table_backward(const PairRepresentation<T>& pairs, const Mat<T>& d_logits, ScorerParams<T>& params, Mat<T>& d_g) {
  params.table_w.grad.noalias() += d_logits.transpose() * pairs.g;
  params.table_b.grad.row(0) += d_logits.colwise().sum();
  d_g.noalias() += d_logits * params.table_w.value;
}

template <typename T>
void qualifier_backward(const PairRepresentation<T>& pairs, const EncodedSentence<T>& enc,
                        const PrunedIndexSet& pruned, const Mat<T>& d_logits, ScorerParams<T>& params, Mat<T>& d_g,
                        Mat<T>& d_h) {
  const int m = pruned.size();
  if (m == 0) return;
  const int p = params.p;
  const Mat<T> gp = detail::gather_pairs(pairs, pruned);
  const Mat<T> hp = detail::gather_rows(enc.vectors, pruned);
  const Mat<T> uh = params.bilinear.value * hp.transpose();
  Mat<T> d_gp = Mat<T>::Zero(gp.rows(), gp.cols());
  Mat<T> d_uh(uh.rows(), uh.cols());
  Mat<T> d_per_label(static_cast<Eigen::Index>(m) * m, m);
  for (int q = 0; q < params.n_qual; ++q) {
    for (Eigen::Index ab = 0; ab < d_per_label.rows(); ++ab)
      for (int c = 0; c < m; ++c) d_per_label(ab, c) = d_logits(ab * m + c, q);
    const auto block = uh.middleRows(static_cast<Eigen::Index>(q) * p, p);
    d_gp.noalias() += d_per_label * block.transpose();
    d_uh.middleRows(static_cast<Eigen::Index>(q) * p, p).noalias() = gp.transpose() * d_per_label;
  }
  if (params.has_qualifier_bias()) params.qualifier_b.grad.row(0) += d_logits.colwise().sum();
  params.bilinear.grad.noalias() += d_uh * hp;
  const Mat<T> d_hp = d_uh.transpose() * params.bilinear.value;  // m x d
  for (int a = 0; a < m; ++a) {
    d_h.row(pruned.original(a)) += d_hp.row(a);
    for (int b = 0; b < m; ++b)
      d_g.row(static_cast<Eigen::Index>(pruned.original(a)) * pairs.n + pruned.original(b)) +=
          d_gp.row(static_cast<Eigen::Index>(a) * m + b);
  }
}

template <typename T>
void pair_backward(const EncodedSentence<T>& enc, const PairRepresentation<T>& pairs, const Mat<T>& d_g,
                   ScorerParams<T>& params, Mat<T>& d_h) {
  const int n = pairs.n;
  const int d = params.d;
  params.pair_out_w.grad.noalias() += d_g.transpose() * pairs.act;
  params.pair_out_b.grad.row(0) += d_g.colwise().sum();
  Mat<T> d_pre = d_g * params.pair_out_w.value;  // n^2 x hidden
  if (params.activation == PairActivation::Gelu)
    d_pre.array() *= pairs.pre.unaryExpr([](T x) { return gelu_grad(x); }).array();
  params.pair_in_b.grad.row(0) += d_pre.colwise().sum();
  Mat<T> d_head = Mat<T>::Zero(n, params.hidden);
  Mat<T> d_tail = Mat<T>::Zero(n, params.hidden);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto row = d_pre.row(static_cast<Eigen::Index>(i) * n + j);
      d_head.row(i) += row;
      d_tail.row(j) += row;
    }
  params.pair_in_w.grad.leftCols(d).noalias() += d_head.transpose() * enc.vectors;
  params.pair_in_w.grad.rightCols(d).noalias() += d_tail.transpose() * enc.vectors;
  d_h.noalias() += d_head * params.pair_in_w.value.leftCols(d);
  d_h.noalias() += d_tail * params.pair_in_w.value.rightCols(d);
}

}  // namespace cubere

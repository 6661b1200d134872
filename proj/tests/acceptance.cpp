// Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails. Criteria 2-4 read the HyperRED
// release from the directory named by HYPERRED_DIR.
//
//   acceptance            run every criterion
//   acceptance 1 5 7      run the listed criteria

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "property_checks.hpp"

using namespace cubere;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// Loads train/dev/test from HYPERRED_DIR as released (no truncation).
struct HyperRed {
  Corpus train, dev, test;
  Corpus all() const {
    Corpus c = train;
    c.insert(c.end(), dev.begin(), dev.end());
    c.insert(c.end(), test.begin(), test.end());
    return c;
  }
};

std::optional<HyperRed> load_hyperred(std::string& why) {
  const char* dir = std::getenv("HYPERRED_DIR");
  if (!dir || !*dir) {
    why = "HYPERRED_DIR is not set; the HyperRED release is required for this criterion";
    return std::nullopt;
  }
  try {
    LoadOptions opts;
    opts.max_words = 0;
    HyperRed h;
    h.train = load_corpus(split_path(dir, "train"), opts);
    h.dev = load_corpus(split_path(dir, "dev"), opts);
    h.test = load_corpus(split_path(dir, "test"), opts);
    return h;
  } catch (const std::exception& e) {
    why = std::string("cannot load HyperRED from ") + dir + ": " + e.what();
    return std::nullopt;
  }
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  const auto r = checks::decoder_equivalence(20240601, 1000);
  const double secs = seconds_since(t0);
  return {r.mismatches == 0 && r.cases == 1000 && secs < 30.0,
          std::to_string(r.cases) + " cases, " + std::to_string(r.mismatches) + " mismatches, " + std::to_string(r.facts) +
              " facts, " + std::to_string(r.multi_cell_groups) + " multi-cell groups, " + fmt(secs, 2) + " s"};
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  std::string why;
  const auto data = load_hyperred(why);
  if (!data) return {false, why};
  const Corpus all = data->all();
  const auto r = oracle_roundtrip(all, build_vocab(all));
  const double secs = seconds_since(t0);
  return {r.rate() >= 0.96 && r.rate() <= 0.99 && secs < 180.0,
          "roundtrip rate " + fmt(r.rate()) + " (" + std::to_string(r.recovered) + "/" + std::to_string(r.gold_facts) +
              "), target 0.9714, band [0.96, 0.99], " + fmt(secs, 1) + " s"};
}

Outcome criterion3() {
  const auto t0 = Clock::now();
  std::string why;
  const auto data = load_hyperred(why);
  if (!data) return {false, why};
  const Corpus all = data->all();
  const auto st = corpus_stats(all);
  const double secs = seconds_since(t0);
  const bool ok = data->train.size() == 39840 && data->dev.size() == 1000 && data->test.size() == 4000 &&
                  st.num_relations == 62 && st.num_qualifiers == 44 && st.unique_facts == 44372 && secs < 60.0;
  return {ok, "sentences " + std::to_string(data->train.size()) + "/" + std::to_string(data->dev.size()) + "/" +
                  std::to_string(data->test.size()) + " (want 39840/1000/4000), |R| " + std::to_string(st.num_relations) +
                  " (62), |Q| " + std::to_string(st.num_qualifiers) + " (44), unique facts " +
                  std::to_string(st.unique_facts) + " (44372), " + fmt(secs, 1) + " s"};
}

Outcome criterion4() {
  const auto t0 = Clock::now();
  std::string why;
  const auto data = load_hyperred(why);
  if (!data) return {false, why};
  const Corpus all = data->all();
  const auto r = qualifier_sparsity(all, build_vocab(all), 20);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(r.unpruned_null_fraction - 0.999900) <= 0.00005 && r.nonnull_increase() >= 5.0 &&
                  r.nonnull_increase() <= 20.0 && secs < 300.0;
  return {ok, "unpruned null fraction " + fmt(r.unpruned_null_fraction) + " (target 0.999900 +- 0.000050), m=20 null fraction " +
                  fmt(r.pruned_null_fraction) + ", non-null increase x" + fmt(r.nonnull_increase(), 2) + " (band [5, 20]), " +
                  fmt(secs, 1) + " s"};
}

Outcome criterion5() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  int runs = 0;
  auto run = [&](const checks::GradCheckResult& r) {
    ++runs;
    if (r.max_relative_error > worst) worst = r.max_relative_error, worst_name = r.worst;
  };
  for (std::uint64_t seed = 1; seed <= 5; ++seed) run(checks::gradient_check(seed));
  run(checks::gradient_check(6, 4, 3, 3, 2, 4, 3, 4, PairActivation::Identity));
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0, std::to_string(runs) + " runs (n=4, d=3, p=2, |Yt|=4, |Yq|=3), max relative error " +
                                           fmt(worst, 10) + " at " + worst_name + ", " + fmt(secs, 2) + " s"};
}

Outcome criterion6() {
  const auto r = checks::overfit_run();
  return {r.best_f1 >= 0.99 && r.epochs_run <= 200 && r.seconds < 300.0,
          "best strict F1 " + fmt(r.best_f1, 4) + " at epoch " + std::to_string(r.best_epoch) + " of " +
              std::to_string(r.epochs_run) + " run, " + fmt(r.seconds, 1) + " s"};
}

Outcome criterion7() {
  const auto t0 = Clock::now();
  const auto r = checks::normalization(7, 100);
  const double secs = seconds_since(t0);
  return {r.passes == 100 && r.all_finite && r.max_table_deviation < 1e-5 && r.max_qualifier_deviation < 1e-5,
          std::to_string(r.passes) + " passes, max |sum-1| table " + fmt(r.max_table_deviation, 9) + ", qualifier " +
              fmt(r.max_qualifier_deviation, 9) + (r.all_finite ? ", all finite, " : ", NON-FINITE values, ") +
              fmt(secs, 2) + " s"};
}

Outcome criterion8() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  auto near = [](double a, double b) { return std::abs(a - b) < 1e-12; };

  Sentence g;
  g.tokens = {"a", "b", "c", "d", "e", "f", "g"};
  g.facts = {HyperFact{{0, 1}, "r1", {1, 2}, "q", {6, 7}}, HyperFact{{2, 3}, "r1", {3, 4}, "q", {6, 7}}};
  const Corpus gold{g};

  const auto perfect = evaluate(facts_of(gold), gold);
  expect(near(perfect.strict.precision(), 1) && near(perfect.strict.recall(), 1) && near(perfect.strict.f1(), 1),
         "pred = gold gives P = R = F1 = 1");

  const auto half = score_strict({{g.facts[0], HyperFact{{4, 5}, "r2", {5, 6}, "q", {6, 7}}}}, gold);
  expect(near(half.precision(), 0.5) && near(half.recall(), 0.5) && near(half.f1(), 0.5),
         "1 correct + 1 spurious of 2 gold gives 0.5/0.5/0.5");

  HyperFact shifted = g.facts[0];
  shifted.value = Span{5, 7};
  const auto off = score_strict({{shifted, g.facts[1]}}, gold);
  expect(off.true_positives == 1 && off.predicted == 2 && off.gold == 2, "value span off by one is FP + FN");

  HyperFact same_triplet = g.facts[0];
  same_triplet.qualifier = "q2";
  same_triplet.value = Span{5, 6};
  const auto trip = score_triplet({{g.facts[0], same_triplet}}, Corpus{Sentence{g.tokens, {g.facts[0]}}});
  expect(trip.true_positives == 1 && trip.predicted == 1, "two facts sharing a triplet give 1 triplet TP");

  Sentence g3 = g;
  g3.facts.push_back(HyperFact{{4, 5}, "r2", {5, 6}, "q", {6, 7}});
  const auto mixed = score_triplet({{HyperFact{{0, 1}, "r1", {1, 2}, "q9", {5, 6}}, HyperFact{{2, 3}, "r2", {3, 4}, "q", {6, 7}}}},
                                   Corpus{g3});
  expect(near(mixed.precision(), 0.5) && near(mixed.recall(), 1.0 / 3.0) && std::abs(mixed.f1() - 0.4) < 1e-12,
         "3 gold / 2 predicted / 1 matching triplets gives P 0.5, R 1/3, F1 0.4");

  const CategoryMap one{{"q", "Time"}, {"q2", "Time"}};
  const auto cat = evaluate({{g.facts[0]}}, gold, &one);
  const auto& time = cat.strict.categories.at("Time");
  expect(time.true_positives == cat.strict.true_positives && time.predicted == cat.strict.predicted &&
             time.gold == cat.strict.gold,
         "single-category breakdown equals the overall report");
  const CategoryMap with_empty{{"q", "Time"}, {"zzz", "Quantity"}};
  const auto empty = category_breakdown(facts_of(gold), gold, with_empty).at("Quantity");
  expect(empty.gold == 0 && empty.predicted == 0 && empty.f1() == 0.0, "empty category reports zero counts and F1 0");

  const auto c = checks::strict_triplet_containment(8, 500);
  expect(c.pairs == 500 && c.violations == 0, "strict-TP implies triplet-TP on 500 random pairs");

  std::string detail = "7 hand-built cases + containment on " + std::to_string(c.pairs) + " random pairs (" +
                       std::to_string(c.violations) + " violations)";
  for (const auto& f : failures) detail += "; FAILED: " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"decoder equals reference decoder on 1000 random sparse cubes", criterion1}},
      {2, {"gold roundtrip rate on HyperRED within [0.96, 0.99]", criterion2}},
      {3, {"HyperRED dataset statistics exact", criterion3}},
      {4, {"HyperRED qualifier cube sparsity and pruning gain", criterion4}},
      {5, {"analytic gradients match finite differences", criterion5}},
      {6, {"overfit synthetic corpus to strict F1 >= 0.99", criterion6}},
      {7, {"softmax outputs normalized and finite", criterion7}},
      {8, {"evaluator arithmetic and strict/triplet containment", criterion8}},
  };
  std::vector<int> selected;
  for (int a = 1; a < argc; ++a) {
    const int id = std::atoi(argv[a]);
    if (!criteria.count(id)) {
      std::cerr << "unknown criterion " << argv[a] << '\n';
      return 2;
    }
    selected.push_back(id);
  }
  if (selected.empty())
    for (const auto& [id, _] : criteria) selected.push_back(id);

  int failed = 0;
  for (int id : selected) {
    const auto& [name, fn] = criteria.at(id);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " | " << name << " | " << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}

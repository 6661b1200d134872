#pragma once

// Micro precision/recall/F1 over exact 5-tuples, over relation triplets, and
// per qualifier category. Both sides are deduplicated per sentence.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cubere/dataset.hpp"
#include "cubere/decoder.hpp"

namespace cubere {

using PredictionCorpus = std::vector<std::vector<HyperFact>>;

struct EvalReport {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::map<std::string, EvalReport> categories;

  double precision() const { return predicted ? double(true_positives) / double(predicted) : 0.0; }
  double recall() const { return gold ? double(true_positives) / double(gold) : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }

  EvalReport& operator+=(const EvalReport& o) {
    true_positives += o.true_positives;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }

  json to_json() const {
    json j{{"precision", precision()}, {"recall", recall()}, {"f1", f1()},
           {"true_positives", true_positives}, {"predicted", predicted}, {"gold", gold}};
    if (!categories.empty()) {
      json c = json::object();
      for (const auto& [name, rep] : categories) c[name] = rep.to_json();
      j["categories"] = std::move(c);
    }
    return j;
  }
};

namespace detail {

inline void check_aligned(std::size_t pred, std::size_t gold) {
  if (pred != gold)
    throw AlignmentError("prediction corpus has " + std::to_string(pred) + " sentences, gold has " +
                         std::to_string(gold));
}

template <typename Key>
EvalReport count_sets(const std::set<Key>& pred, const std::set<Key>& gold) {
  EvalReport r;
  r.predicted = pred.size();
  r.gold = gold.size();
  for (const auto& k : pred) r.true_positives += gold.count(k);
  return r;
}

using Triplet = std::tuple<Span, std::string, Span>;

inline std::set<Triplet> triplets(const std::vector<HyperFact>& facts) {
  std::set<Triplet> out;
  for (const auto& f : facts) out.emplace(f.head, f.relation, f.tail);
  return out;
}

}  // namespace detail

inline PredictionCorpus facts_of(const Corpus& corpus) {
  PredictionCorpus out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back(s.facts);
  return out;
}

inline PredictionCorpus facts_of(const std::vector<std::vector<DecodedFact>>& decoded) {
  PredictionCorpus out;
  out.reserve(decoded.size());
  for (const auto& d : decoded) out.push_back(facts_of(d));
  return out;
}

inline EvalReport score_strict(const PredictionCorpus& pred, const Corpus& gold) {
  detail::check_aligned(pred.size(), gold.size());
  EvalReport total;
  for (std::size_t s = 0; s < gold.size(); ++s)
    total += detail::count_sets(std::set<HyperFact>(pred[s].begin(), pred[s].end()),
                                std::set<HyperFact>(gold[s].facts.begin(), gold[s].facts.end()));
  return total;
}

inline EvalReport score_triplet(const PredictionCorpus& pred, const Corpus& gold) {
  detail::check_aligned(pred.size(), gold.size());
  EvalReport total;
  for (std::size_t s = 0; s < gold.size(); ++s)
    total += detail::count_sets(detail::triplets(pred[s]), detail::triplets(gold[s].facts));
  return total;
}

using CategoryMap = std::map<std::string, std::string>;

inline const std::string kOtherCategory = "other";

inline std::string category_of(const CategoryMap& map, const std::string& qualifier) {
  auto it = map.find(qualifier);
  return it == map.end() ? kOtherCategory : it->second;
}

// Strict scores restricted to facts whose qualifier falls in each category.
// Every category named in the map is reported, even when empty.
inline std::map<std::string, EvalReport> category_breakdown(const PredictionCorpus& pred, const Corpus& gold,
                                                            const CategoryMap& map) {
  detail::check_aligned(pred.size(), gold.size());
  std::map<std::string, EvalReport> out;
  for (const auto& [label, cat] : map) out[cat];
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::map<std::string, std::set<HyperFact>> p, g;
    for (const auto& f : pred[s]) p[category_of(map, f.qualifier)].insert(f);
    for (const auto& f : gold[s].facts) g[category_of(map, f.qualifier)].insert(f);
    std::set<std::string> cats;
    for (const auto& [c, _] : p) cats.insert(c);
    for (const auto& [c, _] : g) cats.insert(c);
    for (const auto& c : cats) out[c] += detail::count_sets(p[c], g[c]);
  }
  return out;
}

// Qualifier -> category assignments covering the qualifier typology
// examples (time, quantity, role, part-whole, location).
inline CategoryMap default_category_map() {
  return {{"start time", "Time"},
          {"end time", "Time"},
          {"point in time", "Time"},
          {"number of matches played", "Quantity"},
          {"number of points/goals/set scored", "Quantity"},
          {"number of points", "Quantity"},
          {"position held", "Role"},
          {"has part", "Part-Whole"},
          {"electoral district", "Location"}};
}

// Category map file: a JSON object from qualifier label to category name.
inline CategoryMap load_category_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open category map: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw SchemaError("category map must be a JSON object of label -> category");
  CategoryMap map;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw SchemaError("category for '" + k + "' must be a string");
    map[k] = v.get<std::string>();
  }
  return map;
}

struct EvaluationResult {
  EvalReport strict;
  EvalReport triplet;

  json to_json() const { return json{{"strict", strict.to_json()}, {"triplet", triplet.to_json()}}; }
};

inline EvaluationResult evaluate(const PredictionCorpus& pred, const Corpus& gold, const CategoryMap* categories = nullptr) {
  EvaluationResult r{score_strict(pred, gold), score_triplet(pred, gold)};
  if (categories) r.strict.categories = category_breakdown(pred, gold, *categories);
  return r;
}

inline std::string format_report(const EvaluationResult& r) {
  std::ostringstream os;
  auto line = [&os](const std::string& name, const EvalReport& e) {
    os << std::left << std::setw(14) << name << std::right << std::fixed << std::setprecision(4) << std::setw(10)
       << e.precision() << std::setw(10) << e.recall() << std::setw(10) << e.f1() << std::setw(8) << e.true_positives
       << std::setw(8) << e.predicted << std::setw(8) << e.gold << '\n';
  };
  os << std::left << std::setw(14) << "scope" << std::right << std::setw(10) << "P" << std::setw(10) << "R"
     << std::setw(10) << "F1" << std::setw(8) << "TP" << std::setw(8) << "pred" << std::setw(8) << "gold" << '\n';
  line("strict", r.strict);
  line("triplet", r.triplet);
  for (const auto& [name, rep] : r.strict.categories) line("  " + name, rep);
  return os.str();
}

}  // namespace cubere

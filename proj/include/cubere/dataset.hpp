#pragma once

// Corpus schema, JSONL reading/writing, label vocabularies and corpus
// statistics.
//
// Canonical line format:
//   {"tokens": [...], "facts": [{"head": [s,e], "relation": "...",
//     "tail": [s,e], "qualifier": "...", "value": [s,e]}, ...]}
// Spans are half-open word ranges. Lines in the released HyperRED layout
// ("relations" with nested "qualifiers") are translated by
// `canonicalize_record` before validation.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "cubere/error.hpp"

namespace cubere {

using json = nlohmann::json;

inline constexpr std::size_t kDefaultMaxWords = 80;

struct Span {
  int start = 0;
  int end = 0;  // exclusive

  int length() const { return end - start; }
  bool contains(int w) const { return w >= start && w < end; }
  bool valid_for(int n) const { return start >= 0 && start < end && end <= n; }

  auto operator<=>(const Span&) const = default;
};

struct HyperFact {
  Span head;
  std::string relation;
  Span tail;
  std::string qualifier;
  Span value;

  auto operator<=>(const HyperFact&) const = default;
};

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<HyperFact> facts;

  int size() const { return static_cast<int>(tokens.size()); }
  bool operator==(const Sentence&) const = default;
};

using Corpus = std::vector<Sentence>;

// Ordered relation (R) and qualifier (Q) label sets. Table labels:
// 0 = null, 1 = Entity, 2.. = relations. Qualifier labels: 0 = null,
// 1.. = qualifiers.
class LabelVocab {
 public:
  static constexpr int kNull = 0;
  static constexpr int kEntity = 1;
  static constexpr int kRelationOffset = 2;
  static constexpr int kQualifierOffset = 1;

  LabelVocab() = default;
  LabelVocab(std::vector<std::string> relations, std::vector<std::string> qualifiers)
      : relations_(std::move(relations)), qualifiers_(std::move(qualifiers)) {
    index_labels();
  }

  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<std::string>& qualifiers() const { return qualifiers_; }

  int num_table_labels() const { return static_cast<int>(relations_.size()) + 2; }
  int num_qualifier_labels() const { return static_cast<int>(qualifiers_.size()) + 1; }

  bool has_relation(const std::string& r) const { return relation_index_.count(r) > 0; }
  bool has_qualifier(const std::string& q) const { return qualifier_index_.count(q) > 0; }

  int table_label(const std::string& relation) const {
    auto it = relation_index_.find(relation);
    if (it == relation_index_.end()) throw LabelError("unknown relation label: " + relation);
    return it->second + kRelationOffset;
  }
  int qualifier_label(const std::string& qualifier) const {
    auto it = qualifier_index_.find(qualifier);
    if (it == qualifier_index_.end()) throw LabelError("unknown qualifier label: " + qualifier);
    return it->second + kQualifierOffset;
  }

  const std::string& relation_name(int table_label) const {
    if (table_label < kRelationOffset || table_label >= num_table_labels())
      throw LabelError("table label " + std::to_string(table_label) + " is not a relation");
    return relations_[table_label - kRelationOffset];
  }
  const std::string& qualifier_name(int qualifier_label) const {
    if (qualifier_label < kQualifierOffset || qualifier_label >= num_qualifier_labels())
      throw LabelError("qualifier label " + std::to_string(qualifier_label) + " is not a qualifier");
    return qualifiers_[qualifier_label - kQualifierOffset];
  }

  bool operator==(const LabelVocab& o) const {
    return relations_ == o.relations_ && qualifiers_ == o.qualifiers_;
  }

  json to_json() const { return json{{"relations", relations_}, {"qualifiers", qualifiers_}}; }

  static LabelVocab from_json(const json& j) {
    if (!j.is_object() || !j.contains("relations") || !j.contains("qualifiers"))
      throw SchemaError("vocabulary must hold 'relations' and 'qualifiers' arrays");
    auto rel = j.at("relations").get<std::vector<std::string>>();
    auto qual = j.at("qualifiers").get<std::vector<std::string>>();
    if (std::set<std::string>(rel.begin(), rel.end()).size() != rel.size() ||
        std::set<std::string>(qual.begin(), qual.end()).size() != qual.size())
      throw SchemaError("vocabulary labels must be unique");
    return LabelVocab(std::move(rel), std::move(qual));
  }

 private:
  void index_labels() {
    relation_index_.clear();
    qualifier_index_.clear();
    for (std::size_t i = 0; i < relations_.size(); ++i)
      relation_index_.emplace(relations_[i], static_cast<int>(i));
    for (std::size_t i = 0; i < qualifiers_.size(); ++i)
      qualifier_index_.emplace(qualifiers_[i], static_cast<int>(i));
  }

  std::vector<std::string> relations_;
  std::vector<std::string> qualifiers_;
  std::unordered_map<std::string, int> relation_index_;
  std::unordered_map<std::string, int> qualifier_index_;
};

struct LoadOptions {
  const LabelVocab* vocab = nullptr;  // when set, facts with unknown labels are dropped
  std::size_t max_words = kDefaultMaxWords;
};

// Counts of everything the loader altered or discarded.
struct LoadReport {
  std::size_t sentences = 0;
  std::size_t truncated_sentences = 0;
  std::size_t dropped_truncated_facts = 0;
  std::size_t collapsed_duplicates = 0;
  std::size_t rejected_label_facts = 0;
  std::size_t skipped_relations_without_qualifier = 0;  // released layout only

  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (truncated_sentences)
      out.push_back(std::to_string(truncated_sentences) + " sentence(s) truncated; " +
                    std::to_string(dropped_truncated_facts) + " fact(s) beyond the boundary dropped");
    if (collapsed_duplicates)
      out.push_back(std::to_string(collapsed_duplicates) + " duplicate fact(s) collapsed");
    if (rejected_label_facts)
      out.push_back(std::to_string(rejected_label_facts) + " fact(s) with out-of-vocabulary labels rejected");
    if (skipped_relations_without_qualifier)
      out.push_back(std::to_string(skipped_relations_without_qualifier) +
                    " relation(s) without qualifiers skipped");
    return out;
  }
};

namespace detail {

inline Span parse_span(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw SchemaError(where + ": span must be a [start, end] integer pair");
  return Span{j[0].get<int>(), j[1].get<int>()};
}

inline std::string get_label(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_string())
    throw SchemaError(where + ": missing string field '" + key + "'");
  return obj.at(key).get<std::string>();
}

inline json span_json(const Span& s) { return json::array({s.start, s.end}); }

}  // namespace detail

// Translates the released HyperRED record layout into the canonical one.
// Canonical records pass through untouched.
inline json canonicalize_record(const json& record, LoadReport* report = nullptr) {
  if (!record.is_object() || record.contains("facts") || !record.contains("relations")) return record;
  json out;
  out["tokens"] = record.contains("tokens") ? record["tokens"] : json::array();
  json facts = json::array();
  for (const auto& rel : record["relations"]) {
    const auto& quals = rel.contains("qualifiers") ? rel["qualifiers"] : json::array();
    if (quals.empty() && report) ++report->skipped_relations_without_qualifier;
    for (const auto& q : quals) {
      facts.push_back(json{{"head", rel.value("head", json())},
                           {"relation", rel.value("label", json())},
                           {"tail", rel.value("tail", json())},
                           {"qualifier", q.value("label", json())},
                           {"value", q.value("span", json())}});
    }
  }
  out["facts"] = std::move(facts);
  return out;
}

// Builds a validated sentence from one canonical record. `index` names the
// sentence in error messages.
inline Sentence sentence_from_json(const json& record, std::size_t index, const LoadOptions& opts = {},
                                   LoadReport* report = nullptr) {
  const std::string where = "sentence " + std::to_string(index);
  if (!record.is_object()) throw SchemaError(where + ": record must be a JSON object");
  if (!record.contains("tokens") || !record["tokens"].is_array())
    throw SchemaError(where + ": missing 'tokens' array");
  Sentence s;
  for (const auto& t : record["tokens"]) {
    if (!t.is_string()) throw SchemaError(where + ": tokens must be strings");
    s.tokens.push_back(t.get<std::string>());
  }
  if (s.tokens.empty()) throw SchemaError(where + ": token list is empty");
  const int full_n = s.size();

  const json facts = record.contains("facts") ? record["facts"] : json::array();
  if (!facts.is_array()) throw SchemaError(where + ": 'facts' must be an array");
  std::size_t fact_index = 0;
  for (const auto& f : facts) {
    const std::string fwhere = where + ", fact " + std::to_string(fact_index++);
    if (!f.is_object()) throw SchemaError(fwhere + ": fact must be an object");
    for (const char* key : {"head", "tail", "value"})
      if (!f.contains(key)) throw SchemaError(fwhere + ": missing span '" + key + "'");
    HyperFact fact{detail::parse_span(f["head"], fwhere), detail::get_label(f, "relation", fwhere),
                   detail::parse_span(f["tail"], fwhere), detail::get_label(f, "qualifier", fwhere),
                   detail::parse_span(f["value"], fwhere)};
    for (const Span* sp : {&fact.head, &fact.tail, &fact.value})
      if (!sp->valid_for(full_n))
        throw SchemaError(fwhere + ": invalid span [" + std::to_string(sp->start) + "," +
                          std::to_string(sp->end) + ") for " + std::to_string(full_n) + " tokens");
    if (opts.vocab && (!opts.vocab->has_relation(fact.relation) || !opts.vocab->has_qualifier(fact.qualifier))) {
      if (report) ++report->rejected_label_facts;
      continue;
    }
    s.facts.push_back(std::move(fact));
  }

  if (opts.max_words > 0 && s.tokens.size() > opts.max_words) {
    const int limit = static_cast<int>(opts.max_words);
    s.tokens.resize(opts.max_words);
    const auto before = s.facts.size();
    std::erase_if(s.facts, [limit](const HyperFact& f) {
      return f.head.end > limit || f.tail.end > limit || f.value.end > limit;
    });
    if (report) {
      ++report->truncated_sentences;
      report->dropped_truncated_facts += before - s.facts.size();
    }
  }

  // Collapse duplicate 5-tuples, keeping first occurrences in order.
  std::set<HyperFact> seen;
  std::vector<HyperFact> unique;
  for (auto& f : s.facts) {
    if (seen.insert(f).second)
      unique.push_back(std::move(f));
    else if (report)
      ++report->collapsed_duplicates;
  }
  s.facts = std::move(unique);
  return s;
}

inline json sentence_to_json(const Sentence& s) {
  json facts = json::array();
  for (const auto& f : s.facts)
    facts.push_back(json{{"head", detail::span_json(f.head)},
                         {"relation", f.relation},
                         {"tail", detail::span_json(f.tail)},
                         {"qualifier", f.qualifier},
                         {"value", detail::span_json(f.value)}});
  return json{{"tokens", s.tokens}, {"facts", std::move(facts)}};
}

inline Corpus read_corpus(std::istream& in, const LoadOptions& opts = {}, LoadReport* report = nullptr) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    corpus.push_back(sentence_from_json(canonicalize_record(record, report), corpus.size(), opts, report));
  }
  if (report) report->sentences = corpus.size();
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& opts = {},
                          LoadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path.string());
  return read_corpus(in, opts, report);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus) out << sentence_to_json(s).dump() << '\n';
}

inline void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file: " + path.string());
  write_corpus(out, corpus);
}

// Union of all labels, sorted lexicographically.
inline LabelVocab build_vocab(const std::vector<const Corpus*>& corpora) {
  std::set<std::string> rel, qual;
  bool any = false;
  for (const Corpus* c : corpora) {
    if (!c) continue;
    for (const auto& s : *c) {
      any = true;
      for (const auto& f : s.facts) {
        rel.insert(f.relation);
        qual.insert(f.qualifier);
      }
    }
  }
  if (!any) throw ConfigError("build_vocab needs at least one non-empty corpus");
  return LabelVocab({rel.begin(), rel.end()}, {qual.begin(), qual.end()});
}

inline LabelVocab build_vocab(const Corpus& corpus) { return build_vocab(std::vector<const Corpus*>{&corpus}); }

inline LabelVocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return LabelVocab::from_json(j);
}

inline void save_vocab(const std::filesystem::path& path, const LabelVocab& vocab) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file: " + path.string());
  out << vocab.to_json().dump(2) << '\n';
}

struct CorpusStats {
  std::size_t sentences = 0;
  std::size_t facts = 0;         // per-sentence facts, summed
  std::size_t unique_facts = 0;  // distinct surface 5-tuples over the corpus
  std::size_t entities = 0;      // distinct participating spans per sentence, summed
  std::size_t num_relations = 0;
  std::size_t num_qualifiers = 0;
  std::optional<double> mean_sentence_length;
  std::optional<double> mean_entity_length;

  json to_json() const {
    json j{{"sentences", sentences},   {"facts", facts},
           {"unique_facts", unique_facts}, {"entities", entities},
           {"num_relations", num_relations}, {"num_qualifiers", num_qualifiers}};
    j["mean_sentence_length"] = mean_sentence_length ? json(*mean_sentence_length) : json(nullptr);
    j["mean_entity_length"] = mean_entity_length ? json(*mean_entity_length) : json(nullptr);
    return j;
  }
};

inline std::string span_text(const Sentence& s, const Span& sp) {
  std::string out;
  for (int w = sp.start; w < sp.end; ++w) {
    if (w > sp.start) out += ' ';
    out += s.tokens[w];
  }
  return out;
}

// Unique facts are keyed on surface text, so the same fact expressed in two
// sentences counts once.
inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.sentences = corpus.size();
  std::set<std::tuple<std::string, std::string, std::string, std::string, std::string>> unique;
  std::set<std::string> rel, qual;
  std::size_t words = 0, entity_words = 0;
  for (const auto& s : corpus) {
    words += s.tokens.size();
    std::set<Span> spans;
    for (const auto& f : s.facts) {
      ++st.facts;
      unique.emplace(span_text(s, f.head), f.relation, span_text(s, f.tail), f.qualifier, span_text(s, f.value));
      rel.insert(f.relation);
      qual.insert(f.qualifier);
      spans.insert(f.head);
      spans.insert(f.tail);
      spans.insert(f.value);
    }
    st.entities += spans.size();
    for (const auto& sp : spans) entity_words += sp.length();
  }
  st.unique_facts = unique.size();
  st.num_relations = rel.size();
  st.num_qualifiers = qual.size();
  if (st.sentences) st.mean_sentence_length = double(words) / double(st.sentences);
  if (st.entities) st.mean_entity_length = double(entity_words) / double(st.entities);
  return st;
}

// Locates `<dir>/<split>.json` or `<dir>/<split>.jsonl`.
inline std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& split) {
  for (const char* ext : {".jsonl", ".json"}) {
    auto p = dir / (split + ext);
    if (std::filesystem::exists(p)) return p;
  }
  throw IoError("no " + split + ".json or " + split + ".jsonl under " + dir.string());
}

}  // namespace cubere

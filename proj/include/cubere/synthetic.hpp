#pragma once

// Deterministic template corpus generator. Patterns are whitespace-separated
// tokens where `{name:type}` marks a slot filled from the pool of `type`.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cubere/dataset.hpp"

namespace cubere {

struct FactPattern {
  std::string head, relation, tail, qualifier, value;  // slot names / labels
};

struct SentenceTemplate {
  std::string pattern;
  std::vector<FactPattern> facts;
};

struct TemplateSpec {
  std::vector<SentenceTemplate> templates;            // ordinary sentences
  std::vector<SentenceTemplate> collision_templates;  // adjacent-cell fact pairs
  std::map<std::string, std::vector<std::string>> fillers;  // type -> surface forms
  std::size_t size = 200;
  std::uint64_t seed = 7;
  double collision_rate = 0.0;

  void validate() const;
};

struct SyntheticCorpus {
  Corpus sentences;
  std::vector<bool> collision;  // parallel to sentences
};

namespace detail {

struct Slot {
  std::string name;
  std::string type;
};

inline bool parse_slot(const std::string& token, Slot& slot) {
  if (token.size() < 5 || token.front() != '{' || token.back() != '}') return false;
  const auto colon = token.find(':');
  if (colon == std::string::npos) throw ConfigError("slot '" + token + "' lacks a type");
  slot.name = token.substr(1, colon - 1);
  slot.type = token.substr(colon + 1, token.size() - colon - 2);
  return true;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

inline void check_template(const SentenceTemplate& t, const TemplateSpec& spec) {
  std::map<std::string, std::string> slots;
  for (const auto& tok : split_ws(t.pattern)) {
    Slot s;
    if (!parse_slot(tok, s)) continue;
    if (!spec.fillers.count(s.type) || spec.fillers.at(s.type).empty())
      throw ConfigError("template slot type '" + s.type + "' has no fillers");
    if (!slots.emplace(s.name, s.type).second) throw ConfigError("template repeats slot '" + s.name + "'");
  }
  if (t.facts.empty()) throw ConfigError("template '" + t.pattern + "' has no facts");
  for (const auto& f : t.facts)
    for (const auto* name : {&f.head, &f.tail, &f.value})
      if (!slots.count(*name)) throw ConfigError("fact references unknown slot '" + *name + "'");
}

// Fills the template and returns the sentence; slot spans come from the
// position of each filler in the emitted token list.
inline Sentence instantiate(const SentenceTemplate& t, const TemplateSpec& spec, std::mt19937_64& rng) {
  Sentence s;
  std::map<std::string, Span> spans;
  std::map<std::string, std::string> used_by_type_name;
  for (const auto& tok : split_ws(t.pattern)) {
    Slot slot;
    if (!parse_slot(tok, slot)) {
      s.tokens.push_back(tok);
      continue;
    }
    const auto& pool = spec.fillers.at(slot.type);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    // Distinct slots of one sentence get distinct surface forms.
    std::string filler;
    for (int tries = 0; tries < 64; ++tries) {
      filler = pool[pick(rng)];
      bool clash = false;
      for (const auto& [_, f] : used_by_type_name) clash = clash || f == filler;
      if (!clash) break;
    }
    used_by_type_name[slot.name] = filler;
    const int start = s.size();
    for (auto& w : split_ws(filler)) s.tokens.push_back(std::move(w));
    spans[slot.name] = Span{start, s.size()};
  }
  for (const auto& f : t.facts)
    s.facts.push_back(HyperFact{spans.at(f.head), f.relation, spans.at(f.tail), f.qualifier, spans.at(f.value)});
  std::sort(s.facts.begin(), s.facts.end());
  for (const auto& f : s.facts)
    if (!f.head.valid_for(s.size()) || !f.tail.valid_for(s.size()) || !f.value.valid_for(s.size()))
      throw ConfigError("template produced an invalid span: " + t.pattern);
  return s;
}

}  // namespace detail

inline void TemplateSpec::validate() const {
  if (templates.empty()) throw ConfigError("template spec has no templates");
  if (collision_rate < 0.0 || collision_rate > 1.0) throw ConfigError("collision rate must lie in [0, 1]");
  if (collision_rate > 0.0 && collision_templates.empty()) throw ConfigError("collision rate > 0 needs collision templates");
  for (const auto& t : templates) detail::check_template(t, *this);
  for (const auto& t : collision_templates) detail::check_template(t, *this);
}

inline std::map<std::string, std::vector<std::string>> default_fillers() {
  std::vector<std::string> people;
  for (const char* first : {"Alice", "Bruno", "Chen", "Dana", "Emil", "Farah", "Goran", "Hana", "Ivan", "Julia", "Kofi", "Lena"})
    for (const char* last : {"Abbott", "Brandt", "Costa", "Dubois", "Eriksen", "Fischer", "Garcia", "Horvat", "Ito", "Jansen"})
      people.push_back(std::string(first) + " " + last);
  std::vector<std::string> years, numbers;
  for (int y = 1950; y <= 2020; ++y) years.push_back(std::to_string(y));
  for (int n = 3; n <= 300; n += 7) numbers.push_back(std::to_string(n));
  return {
      {"person", people},
      {"org", {"Acme Corporation", "Northwind", "Globex", "Initech Labs", "Umbrella Group", "Stark Industries", "Wayne Enterprises",
               "Hooli", "Vandelay Imports", "Soylent Company"}},
      {"team", {"FC Porto", "Ajax", "Celtic", "Benfica", "Real Betis", "Olympique Lyon", "Hajduk Split", "Rapid Wien"}},
      {"party", {"Green Party", "Liberal Union", "Labour Front", "Civic Platform", "Farmers League", "Unity Movement"}},
      {"school", {"Harvard University", "Oxford", "Sorbonne", "ETH Zurich", "Kyoto University", "McGill University"}},
      {"role", {"engineer", "chief executive", "accountant", "head designer", "treasurer", "research scientist"}},
      {"year", years},
      {"number", numbers},
  };
}

// Four relations and three qualifiers, after the membership/start time,
// sports team/matches played and employer/position typology patterns.
inline std::vector<SentenceTemplate> default_templates() {
  return {
      {"{p:person} joined the {o:party} in {y:year} .", {{"p", "member of political party", "o", "start time", "y"}}},
      {"{p:person} played {n:number} matches for {o:team} .", {{"p", "member of sports team", "o", "number of matches played", "n"}}},
      {"{p:person} worked at {o:org} as {r:role} .", {{"p", "employer", "o", "position held", "r"}}},
      {"{p:person} enrolled at {o:school} in {y:year} .", {{"p", "educated at", "o", "start time", "y"}}},
      {"In {y:year} , {p:person} became a member of the {o:party} .", {{"p", "member of political party", "o", "start time", "y"}}},
      {"{o:team} fielded {p:person} in {n:number} matches .", {{"p", "member of sports team", "o", "number of matches played", "n"}}},
      {"{p:person} was hired by {o:org} in {y:year} as {r:role} .",
       {{"p", "employer", "o", "start time", "y"}, {"p", "employer", "o", "position held", "r"}}},
  };
}

// Two heads placed side by side: their cube cells touch, so the streaming
// merge fuses them into one group.
inline std::vector<SentenceTemplate> default_collision_templates() {
  return {
      {"{a:person} {b:person} joined the {o:party} in {y:year} .",
       {{"a", "member of political party", "o", "start time", "y"}, {"b", "member of political party", "o", "start time", "y"}}},
      {"{a:person} {b:person} played {n:number} matches for {o:team} .",
       {{"a", "member of sports team", "o", "number of matches played", "n"},
        {"b", "member of sports team", "o", "number of matches played", "n"}}},
  };
}

inline TemplateSpec default_template_spec(std::size_t size = 200, std::uint64_t seed = 7, double collision_rate = 0.0) {
  TemplateSpec spec;
  spec.templates = default_templates();
  spec.collision_templates = default_collision_templates();
  spec.fillers = default_fillers();
  spec.size = size;
  spec.seed = seed;
  spec.collision_rate = collision_rate;
  return spec;
}

// Exactly round(collision_rate * size) sentences use collision templates, at
// seeded positions. Ordinary templates cycle in order so every label appears
// once the corpus has at least as many ordinary sentences as templates.
inline SyntheticCorpus generate(const TemplateSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto n_collide = static_cast<std::size_t>(std::llround(spec.collision_rate * double(spec.size)));
  std::vector<bool> collide(spec.size, false);
  std::fill(collide.begin(), collide.begin() + static_cast<std::ptrdiff_t>(n_collide), true);
  std::shuffle(collide.begin(), collide.end(), rng);

  SyntheticCorpus out;
  out.sentences.reserve(spec.size);
  std::size_t ordinary = 0, colliding = 0;
  for (std::size_t i = 0; i < spec.size; ++i) {
    const auto& t = collide[i] ? spec.collision_templates[colliding++ % spec.collision_templates.size()]
                               : spec.templates[ordinary++ % spec.templates.size()];
    out.sentences.push_back(detail::instantiate(t, spec, rng));
    out.collision.push_back(collide[i]);
  }
  return out;
}

}  // namespace cubere

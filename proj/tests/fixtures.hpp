#pragma once

#include <string>

#include "cubere/dataset.hpp"

namespace fixtures {

// "Leonard Parker received his PhD from Harvard University in 1967 ."
inline cubere::Sentence leonard_parker() {
  cubere::Sentence s;
  s.tokens = {"Leonard", "Parker", "received", "his", "PhD", "from", "Harvard", "University", "in", "1967", "."};
  s.facts = {cubere::HyperFact{{0, 2}, "educated at", {6, 8}, "end time", {9, 10}}};
  return s;
}

inline const char* kLeonardParkerLine =
    R"({"tokens":["Leonard","Parker","received","his","PhD","from","Harvard","University","in","1967","."],)"
    R"("facts":[{"head":[0,2],"relation":"educated at","tail":[6,8],"qualifier":"end time","value":[9,10]}]})";

}  // namespace fixtures

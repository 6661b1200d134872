#pragma once

#include <stdexcept>
#include <string>

namespace cubere {

// Base of every error raised by the library. `code()` is a stable
// machine-readable tag used by the CLI's one-line error record.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Malformed JSON or config syntax.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("parse", what) {}
};

// Well-formed input that violates the corpus schema (bad spans, missing
// fields, empty token lists).
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error("schema", what) {}
};

// Invalid or inconsistent configuration (unknown keys, shape mismatch,
// empty vocabulary input).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

// Sentence longer than the encoder accepts.
class LengthError : public Error {
 public:
  explicit LengthError(const std::string& what) : Error("length", what) {}
};

// Label index outside the label space.
class LabelError : public Error {
 public:
  explicit LabelError(const std::string& what) : Error("label", what) {}
};

// Prediction and gold corpora not aligned sentence-for-sentence.
class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& what) : Error("alignment", what) {}
};

// Non-finite loss during training.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error("divergence", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace cubere

#pragma once

// Word-level contextual encoders. Every backend returns exactly one row per
// input word; subword backends pool their pieces back onto words.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cubere/dataset.hpp"
#include "cubere/tensor.hpp"

namespace cubere {

enum class EncoderBackend { PretrainedTransformer, RandomTest };
enum class Pooling { MeanSubwords, FirstSubword };

inline std::string to_string(EncoderBackend b) {
  return b == EncoderBackend::RandomTest ? "random-test" : "pretrained-transformer";
}
inline std::string to_string(Pooling p) { return p == Pooling::MeanSubwords ? "mean-subwords" : "first-subword"; }

inline EncoderBackend parse_backend(const std::string& s) {
  if (s == "random-test") return EncoderBackend::RandomTest;
  if (s == "pretrained-transformer") return EncoderBackend::PretrainedTransformer;
  throw ConfigError("unknown encoder backend: " + s);
}
inline Pooling parse_pooling(const std::string& s) {
  if (s == "mean-subwords") return Pooling::MeanSubwords;
  if (s == "first-subword") return Pooling::FirstSubword;
  throw ConfigError("unknown pooling mode: " + s);
}

struct EncoderConfig {
  EncoderBackend backend = EncoderBackend::RandomTest;
  std::string model_id = "bert-base-uncased";
  int hidden_size = 768;
  std::size_t max_words = kDefaultMaxWords;
  Pooling pooling = Pooling::MeanSubwords;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden_size <= 0) throw ConfigError("encoder hidden size must be positive");
    if (max_words == 0) throw ConfigError("encoder max words must be positive");
  }

  json to_json() const {
    return json{{"backend", to_string(backend)}, {"model_id", model_id},     {"hidden_size", hidden_size},
                {"max_words", max_words},        {"pooling", to_string(pooling)}, {"seed", seed}};
  }
  static EncoderConfig from_json(const json& j) {
    EncoderConfig c;
    c.backend = parse_backend(j.at("backend").get<std::string>());
    c.model_id = j.at("model_id").get<std::string>();
    c.hidden_size = j.at("hidden_size").get<int>();
    c.max_words = j.at("max_words").get<std::size_t>();
    c.pooling = parse_pooling(j.at("pooling").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }
};

// Environment variable naming the local directory that holds pretrained
// encoder snapshots, one subdirectory per model identifier.
inline constexpr const char* kEncoderCacheEnv = "CUBERE_ENCODER_CACHE";

inline std::filesystem::path encoder_cache_dir() {
  if (const char* dir = std::getenv(kEncoderCacheEnv); dir && *dir) return dir;
  if (const char* home = std::getenv("HOME"); home && *home) return std::filesystem::path(home) / ".cache" / "cubere";
  return std::filesystem::path(".cache") / "cubere";
}

inline std::filesystem::path resolve_model_dir(const std::string& model_id) {
  std::filesystem::path direct(model_id);
  if (std::filesystem::is_directory(direct)) return direct;
  return encoder_cache_dir() / model_id;
}

template <typename T>
struct EncodedSentence {
  Mat<T> vectors;  // n x d, one row per word

  int n() const { return static_cast<int>(vectors.rows()); }
  int d() const { return static_cast<int>(vectors.cols()); }
};

// Opaque per-sentence state an encoder keeps for its backward pass.
struct EncoderTrace {
  virtual ~EncoderTrace() = default;
};

template <typename T>
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual const EncoderConfig& config() const = 0;
  virtual int hidden_size() const = 0;

  virtual EncodedSentence<T> encode(const std::vector<std::string>& tokens) const = 0;

  // Forward pass that also records what `backward` needs.
  virtual EncodedSentence<T> encode_traced(const std::vector<std::string>& tokens,
                                           std::unique_ptr<EncoderTrace>& trace) const {
    trace.reset();
    return encode(tokens);
  }

  // Accumulates parameter gradients from d(loss)/d(word vectors).
  virtual void backward(const EncoderTrace* /*trace*/, const Mat<T>& /*d_vectors*/) {}

  virtual ParamRefs<T> parameters() { return {}; }

 protected:
  void check_length(const std::vector<std::string>& tokens) const {
    if (tokens.empty()) throw LengthError("cannot encode an empty sentence");
    if (tokens.size() > config().max_words)
      throw LengthError("sentence of " + std::to_string(tokens.size()) + " words exceeds encoder limit of " +
                        std::to_string(config().max_words));
  }
};

// Word -> positions of its subwords in the encoder's subword sequence.
using SubwordAlignment = std::vector<std::vector<int>>;

// Pools subword rows onto words. Positions not referenced by the alignment
// (boundary tokens) never contribute.
template <typename T>
Mat<T> pool_subwords(const Mat<T>& subword_vectors, const SubwordAlignment& alignment, Pooling mode) {
  Mat<T> out = Mat<T>::Zero(static_cast<Eigen::Index>(alignment.size()), subword_vectors.cols());
  for (std::size_t w = 0; w < alignment.size(); ++w) {
    const auto& pieces = alignment[w];
    if (pieces.empty()) throw SchemaError("word " + std::to_string(w) + " has no subwords");
    if (mode == Pooling::FirstSubword) {
      out.row(w) = subword_vectors.row(pieces.front());
    } else {
      for (int p : pieces) out.row(w) += subword_vectors.row(p);
      out.row(w) /= static_cast<T>(pieces.size());
    }
  }
  return out;
}

// Transpose of `pool_subwords`: scatters word gradients onto subwords.
template <typename T>
Mat<T> unpool_subwords(const Mat<T>& d_words, const SubwordAlignment& alignment, Pooling mode, Eigen::Index rows) {
  Mat<T> out = Mat<T>::Zero(rows, d_words.cols());
  for (std::size_t w = 0; w < alignment.size(); ++w) {
    const auto& pieces = alignment[w];
    if (mode == Pooling::FirstSubword) {
      out.row(pieces.front()) += d_words.row(w);
    } else {
      const T scale = T(1) / static_cast<T>(pieces.size());
      for (int p : pieces) out.row(p) += scale * d_words.row(w);
    }
  }
  return out;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t basis = 1469598103934665603ULL) {
  std::uint64_t h = basis;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Deterministic stand-in for a pretrained encoder: each word type gets a
// seeded random embedding, and each row adds a local window average and a
// sentence average so rows carry context. No parameters.
template <typename T>
class RandomTestEncoder final : public Encoder<T> {
 public:
  static constexpr int kWindow = 2;

  explicit RandomTestEncoder(EncoderConfig config) : config_(std::move(config)) { config_.validate(); }

  const EncoderConfig& config() const override { return config_; }
  int hidden_size() const override { return config_.hidden_size; }

  RowVec<T> word_embedding(const std::string& token) const {
    std::mt19937_64 rng(fnv1a64(token) ^ (config_.seed * 0x9E3779B97F4A7C15ULL));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    RowVec<T> e(config_.hidden_size);
    for (int c = 0; c < config_.hidden_size; ++c) e(c) = static_cast<T>(dist(rng));
    return e;
  }

  EncodedSentence<T> encode(const std::vector<std::string>& tokens) const override {
    this->check_length(tokens);
    const int n = static_cast<int>(tokens.size());
    const int d = config_.hidden_size;
    Mat<T> emb(n, d);
    for (int i = 0; i < n; ++i) emb.row(i) = word_embedding(tokens[i]);
    const RowVec<T> mean = emb.colwise().mean();
    EncodedSentence<T> out{Mat<T>(n, d)};
    for (int i = 0; i < n; ++i) {
      RowVec<T> window = RowVec<T>::Zero(d);
      int count = 0;
      for (int o = -kWindow; o <= kWindow; ++o) {
        if (o == 0 || i + o < 0 || i + o >= n) continue;
        window += emb.row(i + o);
        ++count;
      }
      if (count) window /= static_cast<T>(count);
      out.vectors.row(i) = emb.row(i) + T(0.5) * window + T(0.25) * mean;
    }
    return out;
  }

 private:
  EncoderConfig config_;
};

}  // namespace cubere

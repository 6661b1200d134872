#pragma once

// Encoder + scoring head as one trainable unit, plus the checkpoint archive.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <type_traits>

#include "cubere/decoder.hpp"
#include "cubere/encoder.hpp"
#include "cubere/label_cube.hpp"
#include "cubere/losses.hpp"
#include "cubere/scorer.hpp"
#include "cubere/transformer.hpp"

namespace cubere {

template <typename T>
std::unique_ptr<Encoder<T>> make_encoder(const EncoderConfig& config) {
  config.validate();
  if (config.backend == EncoderBackend::RandomTest) return std::make_unique<RandomTestEncoder<T>>(config);
  const auto dir = resolve_model_dir(config.model_id);
  if (!std::filesystem::is_directory(dir))
    throw IoError("encoder '" + config.model_id + "' not found at " + dir.string() + " (set " + kEncoderCacheEnv + ")");
  return TransformerEncoder<T>::load(dir, config);
}

// Everything one forward pass produces for a sentence.
template <typename T>
struct ForwardPass {
  EncodedSentence<T> encoded;
  std::unique_ptr<EncoderTrace> trace;
  PairRepresentation<T> pairs;
  TableScores<T> table;
  std::vector<double> entity;
  PrunedIndexSet pruned;
  QualifierScores<T> quals;
};

struct StepOptions {
  bool union_gold_indices = false;
  double scale = 1.0;  // multiplies the gradient, e.g. 1 / batch size
};

template <typename T>
class CubeModel {
 public:
  CubeModel(std::unique_ptr<Encoder<T>> encoder, ScorerConfig scorer_config, LabelVocab vocab, std::uint64_t seed)
      : encoder_(std::move(encoder)), scorer_config_(scorer_config), vocab_(std::move(vocab)) {
    std::mt19937_64 rng(seed);
    scorer_ = ScorerParams<T>::initialized(encoder_->hidden_size(), scorer_config_, vocab_.num_table_labels(),
                                           vocab_.num_qualifier_labels(), rng);
  }

  CubeModel(std::unique_ptr<Encoder<T>> encoder, ScorerConfig scorer_config, LabelVocab vocab, ScorerParams<T> params)
      : encoder_(std::move(encoder)), scorer_config_(scorer_config), vocab_(std::move(vocab)), scorer_(std::move(params)) {}

  const LabelVocab& vocab() const { return vocab_; }
  const ScorerConfig& scorer_config() const { return scorer_config_; }
  const Encoder<T>& encoder() const { return *encoder_; }
  Encoder<T>& encoder() { return *encoder_; }
  const ScorerParams<T>& scorer() const { return scorer_; }
  ScorerParams<T>& scorer() { return scorer_; }

  ParamRefs<T> parameters() {
    ParamRefs<T> out = encoder_->parameters();
    for (auto* p : scorer_.refs()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  ForwardPass<T> forward(const std::vector<std::string>& tokens, bool traced = false,
                         const Sentence* gold_for_union = nullptr) const {
    ForwardPass<T> f;
    f.encoded = traced ? encoder_->encode_traced(tokens, f.trace) : encoder_->encode(tokens);
    f.pairs = pair_representation(f.encoded, scorer_);
    f.table = table_scores(f.pairs, scorer_);
    f.entity = entity_scores(f.table, scorer_config_.entity_score);
    f.pruned = prune_indices(f.entity, scorer_config_.prune_threshold);
    if (gold_for_union) f.pruned = with_gold_indices(f.pruned, *gold_for_union);
    f.quals = qualifier_scores(f.pairs, f.encoded, f.pruned, scorer_);
    return f;
  }

  std::vector<DecodedFact> predict(const std::vector<std::string>& tokens, const DecodeThresholds& thresholds = {}) const {
    const auto f = forward(tokens);
    return decode(f.table, f.quals, vocab_, thresholds);
  }

  // Forward, losses and backward for one sentence; gradients accumulate.
  LossReport accumulate(const Sentence& s, const StepOptions& opts = {}) {
    auto f = forward(s.tokens, true, opts.union_gold_indices ? &s : nullptr);
    const auto gold_table = build_table_labels(s, vocab_);
    const auto gold_quals = project_gold(build_qualifier_cells(s, vocab_), f.pruned);
    Mat<T> d_table, d_quals;
    LossReport r;
    r.table = table_loss(f.table, gold_table, nullptr, &d_table);
    r.qualifier = qualifier_loss(f.quals, gold_quals, &d_quals);
    r.total = total_loss(r.table, r.qualifier);
    r.dropped_gold_cells = gold_quals.dropped;
    if (!std::isfinite(r.total)) return r;
    const T scale = static_cast<T>(opts.scale);
    d_table *= scale;
    d_quals *= scale;
    Mat<T> d_g = Mat<T>::Zero(f.pairs.g.rows(), f.pairs.g.cols());
    Mat<T> d_h = Mat<T>::Zero(f.encoded.vectors.rows(), f.encoded.vectors.cols());
    table_backward(f.pairs, d_table, scorer_, d_g);
    qualifier_backward(f.pairs, f.encoded, f.pruned, d_quals, scorer_, d_g, d_h);
    pair_backward(f.encoded, f.pairs, d_g, scorer_, d_h);
    encoder_->backward(f.trace.get(), d_h);
    return r;
  }

  // Loss only, no gradients.
  LossReport evaluate_loss(const Sentence& s) const {
    const auto f = forward(s.tokens);
    LossReport r;
    r.table = table_loss(f.table, build_table_labels(s, vocab_));
    const auto gold = project_gold(build_qualifier_cells(s, vocab_), f.pruned);
    r.qualifier = qualifier_loss(f.quals, gold);
    r.total = total_loss(r.table, r.qualifier);
    r.dropped_gold_cells = gold.dropped;
    return r;
  }

 private:
  std::unique_ptr<Encoder<T>> encoder_;
  ScorerConfig scorer_config_;
  LabelVocab vocab_;
  ScorerParams<T> scorer_;
};

// ---------------------------------------------------------------------------
// Checkpoint archive:
//   8 bytes  magic "CUBERECK"
//   4 bytes  format version (little-endian uint32)
//   8 bytes  header length (little-endian uint64)
//   header   JSON: vocab, encoder/scorer config, metadata, tensor index
//   payload  tensors, row-major, little-endian, in index order

inline constexpr char kCheckpointMagic[8] = {'C', 'U', 'B', 'E', 'R', 'E', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
constexpr const char* scalar_tag() {
  if constexpr (std::is_same_v<T, float>)
    return "f32";
  else
    return "f64";
}

struct CheckpointMeta {
  json train_config = json::object();
  double dev_f1 = 0.0;
  int epoch = 0;
};

namespace detail {

template <typename Int>
void write_le(std::ostream& out, Int v) {
  for (std::size_t b = 0; b < sizeof(Int); ++b) out.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * b)) & 0xFF));
}

template <typename Int>
Int read_le(std::istream& in) {
  std::uint64_t v = 0;
  for (std::size_t b = 0; b < sizeof(Int); ++b) {
    const int c = in.get();
    if (c == EOF) throw ParseError("checkpoint truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
  }
  return static_cast<Int>(v);
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::filesystem::path& path, CubeModel<T>& model, const CheckpointMeta& meta) {
  static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");
  json header;
  header["format"] = "cubere-checkpoint";
  header["version"] = kCheckpointVersion;
  header["scalar"] = scalar_tag<T>();
  header["vocab"] = model.vocab().to_json();
  header["encoder"] = model.encoder().config().to_json();
  if (const auto* t = dynamic_cast<const TransformerEncoder<T>*>(&model.encoder())) {
    header["transformer"] = t->architecture().to_json();
    std::vector<std::string> wp;
    for (std::size_t i = 0; i < t->tokenizer().vocab_size(); ++i) wp.push_back(t->tokenizer().token(static_cast<int>(i)));
    header["wordpiece_vocab"] = std::move(wp);
  }
  header["scorer"] = model.scorer_config().to_json();
  header["scorer_dims"] = json{{"d", model.scorer().d}};
  header["train_config"] = meta.train_config;
  header["dev_f1"] = meta.dev_f1;
  header["epoch"] = meta.epoch;
  json index = json::array();
  for (auto* p : model.parameters()) index.push_back(json{{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  header["tensors"] = index;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, 8);
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  detail::write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto* p : model.parameters())
    out.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(T)));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

template <typename T>
struct LoadedCheckpoint {
  std::unique_ptr<CubeModel<T>> model;
  CheckpointMeta meta;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kCheckpointMagic))
    throw ParseError(path.string() + " is not a checkpoint archive");
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto len = detail::read_le<std::uint64_t>(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw ParseError("checkpoint header truncated");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  if (header.value("scalar", "") != scalar_tag<T>())
    throw ConfigError("checkpoint scalar type " + header.value("scalar", std::string("?")) + " does not match");

  auto vocab = LabelVocab::from_json(header.at("vocab"));
  auto enc_cfg = EncoderConfig::from_json(header.at("encoder"));
  std::unique_ptr<Encoder<T>> encoder;
  if (enc_cfg.backend == EncoderBackend::RandomTest) {
    encoder = std::make_unique<RandomTestEncoder<T>>(enc_cfg);
  } else {
    encoder = std::make_unique<TransformerEncoder<T>>(enc_cfg, TransformerConfig::from_json(header.at("transformer")),
                                                      header.at("wordpiece_vocab").get<std::vector<std::string>>());
  }
  const auto scfg = ScorerConfig::from_json(header.at("scorer"));
  auto params = ScorerParams<T>::zeros(header.at("scorer_dims").at("d").get<int>(), scfg, vocab.num_table_labels(),
                                       vocab.num_qualifier_labels());
  auto model = std::make_unique<CubeModel<T>>(std::move(encoder), scfg, std::move(vocab), std::move(params));

  std::map<std::string, Parameter<T>*> by_name;
  for (auto* p : model->parameters()) by_name[p->name] = p;
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw SchemaError("checkpoint holds unknown tensor " + name);
    Parameter<T>& p = *it->second;
    if (entry.at("rows").get<Eigen::Index>() != p.value.rows() || entry.at("cols").get<Eigen::Index>() != p.value.cols())
      throw SchemaError("checkpoint tensor " + name + " has unexpected shape");
    if (!in.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(T))))
      throw ParseError("checkpoint payload truncated at " + name);
    by_name.erase(it);
  }
  if (!by_name.empty()) throw SchemaError("checkpoint lacks tensor " + by_name.begin()->first);
  CheckpointMeta meta{header.value("train_config", json::object()), header.value("dev_f1", 0.0), header.value("epoch", 0)};
  return LoadedCheckpoint<T>{std::move(model), std::move(meta)};
}

}  // namespace cubere

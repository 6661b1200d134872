#pragma once

// BERT-compatible transformer encoder (post-norm, GELU, learned absolute
// positions) with a hand-written backward pass. Weights load from a
// HuggingFace-style snapshot directory: config.json, vocab.txt and
// model.safetensors. Dropout is not applied.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "cubere/encoder.hpp"
#include "cubere/safetensors.hpp"
#include "cubere/wordpiece.hpp"

namespace cubere {

struct TransformerConfig {
  int vocab_size = 30522;
  int hidden = 768;
  int layers = 12;
  int heads = 12;
  int intermediate = 3072;
  int max_positions = 512;
  int type_vocab = 2;
  double layer_norm_eps = 1e-12;

  json to_json() const {
    return json{{"vocab_size", vocab_size},       {"hidden_size", hidden},
                {"num_hidden_layers", layers},    {"num_attention_heads", heads},
                {"intermediate_size", intermediate}, {"max_position_embeddings", max_positions},
                {"type_vocab_size", type_vocab},  {"layer_norm_eps", layer_norm_eps}};
  }

  static TransformerConfig from_json(const json& j) {
    TransformerConfig c;
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.hidden = j.value("hidden_size", c.hidden);
    c.layers = j.value("num_hidden_layers", c.layers);
    c.heads = j.value("num_attention_heads", c.heads);
    c.intermediate = j.value("intermediate_size", c.intermediate);
    c.max_positions = j.value("max_position_embeddings", c.max_positions);
    c.type_vocab = j.value("type_vocab_size", c.type_vocab);
    c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
    if (j.contains("hidden_act") && j["hidden_act"] != "gelu")
      throw ConfigError("only the exact GELU activation is supported, got " + j["hidden_act"].dump());
    if (c.hidden % c.heads != 0) throw ConfigError("hidden size must be divisible by the number of heads");
    return c;
  }
};

namespace detail {

template <typename T>
struct LayerNormCache {
  Mat<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const Parameter<T>& gamma, const Parameter<T>& beta, double eps,
                  LayerNormCache<T>* cache) {
  Mat<T> xhat(x.rows(), x.cols());
  std::vector<T> inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().mean();
    inv[r] = T(1) / std::sqrt(var + T(eps));
    xhat.row(r) = (x.row(r).array() - mean) * inv[r];
  }
  Mat<T> y = (xhat.array().rowwise() * gamma.value.row(0).array()).rowwise() + beta.value.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const LayerNormCache<T>& cache, Parameter<T>& gamma, Parameter<T>& beta) {
  gamma.grad.row(0).array() += (dy.array() * cache.xhat.array()).colwise().sum();
  beta.grad.row(0) += dy.colwise().sum();
  Mat<T> dxhat = dy.array().rowwise() * gamma.value.row(0).array();
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T mean_d = dxhat.row(r).mean();
    const T mean_dx = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
    dx.row(r) = cache.inv_std[r] * (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx);
  }
  return dx;
}

template <typename T>
Mat<T> affine(const Mat<T>& x, const Parameter<T>& w, const Parameter<T>& b) {
  Mat<T> y = x * w.value.transpose();
  y.rowwise() += b.value.row(0);
  return y;
}

template <typename T>
void affine_backward(const Mat<T>& x, const Mat<T>& dy, Parameter<T>& w, Parameter<T>& b, Mat<T>* dx) {
  w.grad.noalias() += dy.transpose() * x;
  b.grad.row(0) += dy.colwise().sum();
  if (dx) dx->noalias() += dy * w.value;
}

}  // namespace detail

template <typename T>
struct TransformerLayer {
  Parameter<T> q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b, ln1_g, ln1_b, i_w, i_b, f_w, f_b, ln2_g, ln2_b;

  TransformerLayer(const TransformerConfig& c, int index) {
    const std::string p = "encoder.layer." + std::to_string(index) + ".";
    const int h = c.hidden, in = c.intermediate;
    q_w = Parameter<T>(p + "attention.self.query.weight", h, h);
    q_b = Parameter<T>(p + "attention.self.query.bias", 1, h, false);
    k_w = Parameter<T>(p + "attention.self.key.weight", h, h);
    k_b = Parameter<T>(p + "attention.self.key.bias", 1, h, false);
    v_w = Parameter<T>(p + "attention.self.value.weight", h, h);
    v_b = Parameter<T>(p + "attention.self.value.bias", 1, h, false);
    o_w = Parameter<T>(p + "attention.output.dense.weight", h, h);
    o_b = Parameter<T>(p + "attention.output.dense.bias", 1, h, false);
    ln1_g = Parameter<T>(p + "attention.output.LayerNorm.weight", 1, h, false);
    ln1_b = Parameter<T>(p + "attention.output.LayerNorm.bias", 1, h, false);
    i_w = Parameter<T>(p + "intermediate.dense.weight", in, h);
    i_b = Parameter<T>(p + "intermediate.dense.bias", 1, in, false);
    f_w = Parameter<T>(p + "output.dense.weight", h, in);
    f_b = Parameter<T>(p + "output.dense.bias", 1, h, false);
    ln2_g = Parameter<T>(p + "output.LayerNorm.weight", 1, h, false);
    ln2_b = Parameter<T>(p + "output.LayerNorm.bias", 1, h, false);
    ln1_g.value.setOnes();
    ln2_g.value.setOnes();
  }

  ParamRefs<T> refs() {
    return {&q_w, &q_b, &k_w, &k_b, &v_w, &v_b, &o_w, &o_b, &ln1_g, &ln1_b, &i_w, &i_b, &f_w, &f_b, &ln2_g, &ln2_b};
  }
};

template <typename T>
class TransformerEncoder final : public Encoder<T> {
 public:
  TransformerEncoder(EncoderConfig config, TransformerConfig arch, std::vector<std::string> vocab)
      : config_(std::move(config)), arch_(arch), tokenizer_(std::move(vocab)) {
    config_.hidden_size = arch_.hidden;
    config_.validate();
    const int h = arch_.hidden;
    word_ = Parameter<T>("embeddings.word_embeddings.weight", arch_.vocab_size, h);
    pos_ = Parameter<T>("embeddings.position_embeddings.weight", arch_.max_positions, h);
    type_ = Parameter<T>("embeddings.token_type_embeddings.weight", arch_.type_vocab, h);
    emb_ln_g_ = Parameter<T>("embeddings.LayerNorm.weight", 1, h, false);
    emb_ln_b_ = Parameter<T>("embeddings.LayerNorm.bias", 1, h, false);
    emb_ln_g_.value.setOnes();
    for (int l = 0; l < arch_.layers; ++l) layers_.emplace_back(arch_, l);
    if (static_cast<std::size_t>(arch_.vocab_size) != tokenizer_.vocab_size())
      throw ConfigError("vocab.txt has " + std::to_string(tokenizer_.vocab_size()) + " entries, model expects " +
                        std::to_string(arch_.vocab_size));
    for (auto* p : embedding_refs()) p->depth = arch_.layers + 1;
    for (int l = 0; l < arch_.layers; ++l)
      for (auto* p : layers_[l].refs()) p->depth = arch_.layers - l;
  }

  // Loads a snapshot directory holding config.json, vocab.txt and
  // model.safetensors.
  static std::unique_ptr<TransformerEncoder> load(const std::filesystem::path& dir, EncoderConfig config) {
    std::ifstream cfg(dir / "config.json");
    if (!cfg) throw IoError("no config.json in encoder directory " + dir.string());
    json j;
    try {
      j = json::parse(cfg);
    } catch (const json::parse_error& e) {
      throw ParseError((dir / "config.json").string() + ": " + e.what());
    }
    auto arch = TransformerConfig::from_json(j);
    std::vector<std::string> vocab;
    {
      std::ifstream in(dir / "vocab.txt");
      if (!in) throw IoError("no vocab.txt in encoder directory " + dir.string());
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        vocab.push_back(line);
      }
    }
    auto enc = std::make_unique<TransformerEncoder>(std::move(config), arch, std::move(vocab));
    enc->load_weights(read_safetensors(dir / "model.safetensors"));
    return enc;
  }

  void load_weights(const std::map<std::string, SafeTensor>& tensors) {
    for (auto* p : parameters()) {
      const SafeTensor* found = nullptr;
      for (const auto& name : candidate_names(p->name)) {
        if (auto it = tensors.find(name); it != tensors.end()) {
          found = &it->second;
          break;
        }
      }
      if (!found) throw SchemaError("encoder weights lack tensor " + p->name);
      Mat<T> m = to_matrix<T>(*found);
      if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
        throw SchemaError("tensor " + p->name + " has unexpected shape");
      p->value = std::move(m);
    }
  }

  const EncoderConfig& config() const override { return config_; }
  int hidden_size() const override { return arch_.hidden; }
  const TransformerConfig& architecture() const { return arch_; }
  const WordPieceTokenizer& tokenizer() const { return tokenizer_; }

  EncodedSentence<T> encode(const std::vector<std::string>& tokens) const override {
    return run(tokens, nullptr);
  }

  EncodedSentence<T> encode_traced(const std::vector<std::string>& tokens,
                                   std::unique_ptr<EncoderTrace>& trace) const override {
    auto t = std::make_unique<Trace>();
    auto out = run(tokens, t.get());
    trace = std::move(t);
    return out;
  }

  // Encodes a raw subword id sequence (including boundary tokens) and
  // returns every position's final hidden state.
  Mat<T> encode_ids(const std::vector<int>& ids) const { return forward_ids(ids, nullptr); }

  void backward(const EncoderTrace* trace, const Mat<T>& d_words) override {
    const auto* t = dynamic_cast<const Trace*>(trace);
    if (!t) throw ConfigError("transformer backward needs a trace from encode_traced");
    Mat<T> dx = unpool_subwords<T>(d_words, t->alignment, config_.pooling, static_cast<Eigen::Index>(t->ids.size()));
    for (int l = arch_.layers - 1; l >= 0; --l) dx = layer_backward(layers_[l], t->layers[l], dx);
    const Mat<T> demb = detail::layer_norm_backward<T>(dx, t->emb_ln, emb_ln_g_, emb_ln_b_);
    for (std::size_t s = 0; s < t->ids.size(); ++s) {
      word_.grad.row(t->ids[s]) += demb.row(s);
      pos_.grad.row(s) += demb.row(s);
      type_.grad.row(0) += demb.row(s);
    }
  }

  ParamRefs<T> parameters() override {
    ParamRefs<T> out = embedding_refs();
    for (auto& layer : layers_)
      for (auto* p : layer.refs()) out.push_back(p);
    return out;
  }

 private:
  struct LayerTrace {
    Mat<T> x_in, q, k, v, ctx, x1, inter_pre, inter_act;
    std::vector<Mat<T>> probs;  // one S x S matrix per head
    detail::LayerNormCache<T> ln1, ln2;
  };

  struct Trace final : EncoderTrace {
    std::vector<int> ids;
    SubwordAlignment alignment;
    detail::LayerNormCache<T> emb_ln;
    std::vector<LayerTrace> layers;
  };

  ParamRefs<T> embedding_refs() { return {&word_, &pos_, &type_, &emb_ln_g_, &emb_ln_b_}; }

  static std::vector<std::string> candidate_names(const std::string& name) {
    std::vector<std::string> out{name, "bert." + name};
    for (const auto& base : std::vector<std::string>{name, "bert." + name}) {
      if (base.ends_with("LayerNorm.weight")) out.push_back(base.substr(0, base.size() - 6) + "gamma");
      if (base.ends_with("LayerNorm.bias")) out.push_back(base.substr(0, base.size() - 4) + "beta");
    }
    return out;
  }

  EncodedSentence<T> run(const std::vector<std::string>& tokens, Trace* trace) const {
    this->check_length(tokens);
    std::vector<int> ids;
    SubwordAlignment alignment = align_words(tokenizer_, tokens, ids, static_cast<std::size_t>(arch_.max_positions));
    Mat<T> hidden = forward_ids(ids, trace);
    EncodedSentence<T> out{pool_subwords<T>(hidden, alignment, config_.pooling)};
    if (trace) {
      trace->ids = std::move(ids);
      trace->alignment = std::move(alignment);
    }
    return out;
  }

  Mat<T> forward_ids(const std::vector<int>& ids, Trace* trace) const {
    const Eigen::Index s_len = static_cast<Eigen::Index>(ids.size());
    if (s_len > arch_.max_positions) throw LengthError("subword sequence exceeds the position table");
    Mat<T> emb(s_len, arch_.hidden);
    for (Eigen::Index s = 0; s < s_len; ++s) {
      if (ids[s] < 0 || ids[s] >= arch_.vocab_size) throw LabelError("subword id out of range");
      emb.row(s) = word_.value.row(ids[s]) + pos_.value.row(s) + type_.value.row(0);
    }
    Mat<T> x = detail::layer_norm<T>(emb, emb_ln_g_, emb_ln_b_, arch_.layer_norm_eps, trace ? &trace->emb_ln : nullptr);
    if (trace) trace->layers.resize(arch_.layers);
    for (int l = 0; l < arch_.layers; ++l) x = layer_forward(layers_[l], x, trace ? &trace->layers[l] : nullptr);
    return x;
  }

  Mat<T> layer_forward(const TransformerLayer<T>& L, const Mat<T>& x, LayerTrace* t) const {
    const int heads = arch_.heads;
    const int dh = arch_.hidden / heads;
    const T scale = T(1) / std::sqrt(T(dh));
    Mat<T> q = detail::affine<T>(x, L.q_w, L.q_b);
    Mat<T> k = detail::affine<T>(x, L.k_w, L.k_b);
    Mat<T> v = detail::affine<T>(x, L.v_w, L.v_b);
    Mat<T> ctx(x.rows(), arch_.hidden);
    std::vector<Mat<T>> probs;
    for (int h = 0; h < heads; ++h) {
      const Mat<T> scores = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
      Mat<T> p = softmax_rows<T>(scores);
      ctx.middleCols(h * dh, dh) = p * v.middleCols(h * dh, dh);
      probs.push_back(std::move(p));
    }
    const Mat<T> attn_sum = x + detail::affine<T>(ctx, L.o_w, L.o_b);
    Mat<T> x1 = detail::layer_norm<T>(attn_sum, L.ln1_g, L.ln1_b, arch_.layer_norm_eps, t ? &t->ln1 : nullptr);
    Mat<T> inter_pre = detail::affine<T>(x1, L.i_w, L.i_b);
    Mat<T> inter_act = inter_pre.unaryExpr([](T z) { return gelu(z); });
    const Mat<T> out_sum = x1 + detail::affine<T>(inter_act, L.f_w, L.f_b);
    Mat<T> x2 = detail::layer_norm<T>(out_sum, L.ln2_g, L.ln2_b, arch_.layer_norm_eps, t ? &t->ln2 : nullptr);
    if (t) {
      t->x_in = x;
      t->q = std::move(q);
      t->k = std::move(k);
      t->v = std::move(v);
      t->ctx = std::move(ctx);
      t->probs = std::move(probs);
      t->x1 = std::move(x1);
      t->inter_pre = std::move(inter_pre);
      t->inter_act = std::move(inter_act);
    }
    return x2;
  }

  Mat<T> layer_backward(TransformerLayer<T>& L, const LayerTrace& t, const Mat<T>& dx2) {
    const int heads = arch_.heads;
    const int dh = arch_.hidden / heads;
    const T scale = T(1) / std::sqrt(T(dh));

    const Mat<T> d_out_sum = detail::layer_norm_backward<T>(dx2, t.ln2, L.ln2_g, L.ln2_b);
    Mat<T> d_x1 = d_out_sum;
    Mat<T> d_inter = Mat<T>::Zero(t.inter_act.rows(), t.inter_act.cols());
    detail::affine_backward<T>(t.inter_act, d_out_sum, L.f_w, L.f_b, &d_inter);
    d_inter.array() *= t.inter_pre.unaryExpr([](T z) { return gelu_grad(z); }).array();
    detail::affine_backward<T>(t.x1, d_inter, L.i_w, L.i_b, &d_x1);

    const Mat<T> d_attn_sum = detail::layer_norm_backward<T>(d_x1, t.ln1, L.ln1_g, L.ln1_b);
    Mat<T> d_x = d_attn_sum;
    Mat<T> d_ctx = Mat<T>::Zero(t.ctx.rows(), t.ctx.cols());
    detail::affine_backward<T>(t.ctx, d_attn_sum, L.o_w, L.o_b, &d_ctx);

    Mat<T> d_q(t.q.rows(), t.q.cols()), d_k(t.k.rows(), t.k.cols()), d_v(t.v.rows(), t.v.cols());
    for (int h = 0; h < heads; ++h) {
      const Mat<T>& p = t.probs[h];
      const auto dc = d_ctx.middleCols(h * dh, dh);
      const Mat<T> dp = dc * t.v.middleCols(h * dh, dh).transpose();
      d_v.middleCols(h * dh, dh) = p.transpose() * dc;
      Mat<T> ds(p.rows(), p.cols());
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const T dot = (dp.row(r).array() * p.row(r).array()).sum();
        ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
      }
      ds *= scale;
      d_q.middleCols(h * dh, dh) = ds * t.k.middleCols(h * dh, dh);
      d_k.middleCols(h * dh, dh) = ds.transpose() * t.q.middleCols(h * dh, dh);
    }
    detail::affine_backward<T>(t.x_in, d_q, L.q_w, L.q_b, &d_x);
    detail::affine_backward<T>(t.x_in, d_k, L.k_w, L.k_b, &d_x);
    detail::affine_backward<T>(t.x_in, d_v, L.v_w, L.v_b, &d_x);
    return d_x;
  }

  EncoderConfig config_;
  TransformerConfig arch_;
  WordPieceTokenizer tokenizer_;
  Parameter<T> word_, pos_, type_, emb_ln_g_, emb_ln_b_;
  std::vector<TransformerLayer<T>> layers_;
};

}  // namespace cubere

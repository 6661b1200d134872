#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "cubere/cubere.hpp"
#include "cubere/transformer.hpp"
#include "oracles.hpp"

using namespace cubere;

namespace {

const std::filesystem::path kTinyBert = std::filesystem::path(CUBERE_TEST_DATA_DIR) / "tiny_bert";

EncoderConfig random_config(int d, std::uint64_t seed = 1) {
  EncoderConfig c;
  c.backend = EncoderBackend::RandomTest;
  c.hidden_size = d;
  c.seed = seed;
  return c;
}

// Splits every word into fixed-size character chunks.
class ChunkTokenizer final : public SubwordTokenizer {
 public:
  std::vector<int> word_pieces(const std::string& word) const override {
    std::vector<int> ids;
    for (std::size_t i = 0; i < word.size(); i += 3) ids.push_back(static_cast<int>(10 + i));
    return ids;
  }
  int cls_id() const override { return 1; }
  int sep_id() const override { return 2; }
};

Mat<double> to_mat(const json& rows) {
  Mat<double> m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c].get<double>();
  return m;
}

}  // namespace

TEST(RandomEncoder, ShapeAndDeterminism) {
  const RandomTestEncoder<float> enc(random_config(768));
  std::vector<std::string> words;
  for (int i = 0; i < 12; ++i) words.push_back("w" + std::to_string(i));
  const auto a = enc.encode(words);
  EXPECT_EQ(a.n(), 12);
  EXPECT_EQ(a.d(), 768);
  const auto b = RandomTestEncoder<float>(random_config(768)).encode(words);
  EXPECT_EQ(std::memcmp(a.vectors.data(), b.vectors.data(), sizeof(float) * a.vectors.size()), 0);
  const auto c = RandomTestEncoder<float>(random_config(768, 2)).encode(words);
  EXPECT_NE(a.vectors, c.vectors);
}

TEST(RandomEncoder, LengthLimits) {
  const RandomTestEncoder<float> enc(random_config(8));
  EXPECT_THROW(enc.encode({}), LengthError);
  EXPECT_THROW(enc.encode(std::vector<std::string>(81, "w")), LengthError);
  EXPECT_NO_THROW(enc.encode(std::vector<std::string>(80, "w")));
}

TEST(Pooling, MeanOfThreeSubwords) {
  const ChunkTokenizer tok;
  std::vector<int> ids;
  const auto alignment = align_words(tok, {"ab", "abcdefgh", "xyz"}, ids, 512);
  ASSERT_EQ(alignment[1].size(), 3u);
  EXPECT_EQ(ids.front(), 1);
  EXPECT_EQ(ids.back(), 2);
  Mat<double> sub(ids.size(), 2);
  for (Eigen::Index r = 0; r < sub.rows(); ++r) sub.row(r) << double(r), double(r * r);
  const auto mean = pool_subwords<double>(sub, alignment, Pooling::MeanSubwords);
  // Word 1 owns subword positions 2, 3, 4.
  EXPECT_DOUBLE_EQ(mean(1, 0), (2.0 + 3.0 + 4.0) / 3.0);
  EXPECT_DOUBLE_EQ(mean(1, 1), (4.0 + 9.0 + 16.0) / 3.0);
  EXPECT_DOUBLE_EQ(mean(0, 0), 1.0);
  const auto first = pool_subwords<double>(sub, alignment, Pooling::FirstSubword);
  EXPECT_DOUBLE_EQ(first(1, 0), 2.0);
  // unpool is the transpose of pool.
  Mat<double> dw(3, 2);
  dw << 1, 2, 3, 4, 5, 6;
  const auto back = unpool_subwords<double>(dw, alignment, Pooling::MeanSubwords, sub.rows());
  EXPECT_NEAR((mean.cwiseProduct(dw)).sum(), (sub.cwiseProduct(back)).sum(), 1e-12);
}

TEST(Pooling, OverlongSequencesKeepOnePiecePerWord) {
  const ChunkTokenizer tok;
  std::vector<int> ids;
  const auto alignment = align_words(tok, {"abcdefghijkl", "abcdef", "a"}, ids, 6);
  EXPECT_EQ(ids.size(), 6u);
  for (const auto& a : alignment) EXPECT_FALSE(a.empty());
  EXPECT_THROW(align_words(tok, {"a", "b", "c", "d", "e"}, ids, 6), LengthError);
}

TEST(WordPiece, GreedyLongestMatch) {
  const WordPieceTokenizer tok({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "un", "##aff", "##able", "want", "##ed", ",", "cafe", "na", "##ive"});
  EXPECT_EQ(tok.word_pieces("unaffable"), (std::vector<int>{4, 5, 6}));
  EXPECT_EQ(tok.word_pieces("Wanted"), (std::vector<int>{7, 8}));
  EXPECT_EQ(tok.word_pieces("café"), (std::vector<int>{10}));
  EXPECT_EQ(tok.word_pieces("naïve"), (std::vector<int>{11, 12}));
  EXPECT_EQ(tok.word_pieces("wanted,"), (std::vector<int>{7, 8, 9}));
  EXPECT_EQ(tok.word_pieces("xyz"), (std::vector<int>{1}));
  EXPECT_EQ(tok.word_pieces(""), (std::vector<int>{1}));
  EXPECT_EQ(tok.cls_id(), 2);
  EXPECT_THROW(WordPieceTokenizer({"[UNK]"}), SchemaError);
}

TEST(Transformer, MatchesReferenceImplementation) {
  ASSERT_TRUE(std::filesystem::exists(kTinyBert / "expected.json")) << kTinyBert;
  std::ifstream in(kTinyBert / "expected.json");
  const json expected = json::parse(in);
  for (Pooling pooling : {Pooling::MeanSubwords, Pooling::FirstSubword}) {
    EncoderConfig cfg;
    cfg.pooling = pooling;
    const auto enc = TransformerEncoder<double>::load(kTinyBert, cfg);
    EXPECT_EQ(enc->hidden_size(), 16);
    for (const auto& c : expected["cases"]) {
      const auto words = c["words"].get<std::vector<std::string>>();
      std::vector<int> ids;
      const auto alignment = align_words(enc->tokenizer(), words, ids, 512);
      EXPECT_EQ(ids, c["ids"].get<std::vector<int>>());
      const Mat<double> states = enc->encode_ids(ids);
      EXPECT_LT((states - to_mat(c["subword_states"])).cwiseAbs().maxCoeff(), 1e-5);
      const auto pooled = enc->encode(words).vectors;
      const auto& ref = c[pooling == Pooling::MeanSubwords ? "mean_pooled" : "first_pooled"];
      EXPECT_LT((pooled - to_mat(ref)).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST(Transformer, BackwardMatchesFiniteDifferences) {
  EncoderConfig cfg;
  auto enc = TransformerEncoder<double>::load(kTinyBert, cfg);
  const std::vector<std::string> words{"Unbelievable", "results", "in", "1967"};
  std::mt19937_64 rng(3);
  Mat<double> weight(4, 16);
  uniform_init(weight, rng, 1.0);
  auto loss = [&] { return enc->encode(words).vectors.cwiseProduct(weight).sum(); };
  for (auto* p : enc->parameters()) p->zero_grad();
  std::unique_ptr<EncoderTrace> trace;
  enc->encode_traced(words, trace);
  enc->backward(trace.get(), weight);
  double worst = 0.0;
  std::string worst_name;
  for (auto* p : enc->parameters()) {
    const auto numeric = oracle::numeric_grad(p->value, loss, 1e-5);
    const double err = oracle::relative_error(p->grad, numeric);
    if (err > worst) worst = err, worst_name = p->name;
  }
  EXPECT_LT(worst, 1e-5) << worst_name;
}

TEST(Transformer, LayerDepthsForDecay) {
  EncoderConfig cfg;
  auto enc = TransformerEncoder<float>::load(kTinyBert, cfg);
  for (auto* p : enc->parameters()) {
    int expected = -1;
    if (p->name.rfind("embeddings.", 0) == 0) expected = 3;
    if (p->name.rfind("encoder.layer.1.", 0) == 0) expected = 1;
    if (p->name.rfind("encoder.layer.0.", 0) == 0) expected = 2;
    EXPECT_EQ(p->depth, expected) << p->name;
  }
}

TEST(Transformer, MissingSnapshotIsIoError) {
  EXPECT_THROW(TransformerEncoder<float>::load("/nonexistent/model", EncoderConfig{}), IoError);
}

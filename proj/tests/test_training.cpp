#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "fixtures.hpp"
#include "property_checks.hpp"

using namespace cubere;

TEST(Schedule, WarmupOverTwoOfTenSteps) {
  const LinearWarmupSchedule s(1.0, 10, 0.2);
  EXPECT_EQ(s.warmup_steps(), 2u);
  EXPECT_DOUBLE_EQ(s.at(1), 0.5);
  EXPECT_DOUBLE_EQ(s.at(2), 1.0);
  EXPECT_DOUBLE_EQ(s.at(6), 0.5);
  EXPECT_DOUBLE_EQ(s.at(10), 0.0);
  EXPECT_THROW(LinearWarmupSchedule(1.0, 10, 1.0), ConfigError);
}

TEST(Schedule, WarmupRoundsUp) {
  const LinearWarmupSchedule s(2.0, 7, 0.2);
  EXPECT_EQ(s.warmup_steps(), 2u);
  EXPECT_DOUBLE_EQ(s.at(1), 1.0);
}

TEST(Clipping, RescalesToMaxNorm) {
  Parameter<double> a("a", 1, 2), b("b", 1, 1);
  a.grad << 3, 0;
  b.grad << 4;
  const ParamRefs<double> ps{&a, &b};
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(global_grad_norm(ps), 1.0, 1e-6);
  EXPECT_NEAR(a.grad(0, 0) / b.grad(0, 0), 0.75, 1e-12);
  a.grad << 0.1, 0;
  b.grad << 0;
  clip_grad_norm(ps, 1.0);
  EXPECT_DOUBLE_EQ(a.grad(0, 0), 0.1);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  Parameter<double> w("w", 1, 2);
  w.value << 1.0, -1.0;
  w.grad << 0.5, -2.0;
  AdamW<double> opt(AdamWConfig{0.9, 0.999, 1e-12, 0.0, 1.0});
  opt.step({&w}, 0.1);
  // Bias-corrected first step is lr * sign(grad).
  EXPECT_NEAR(w.value(0, 0), 0.9, 1e-9);
  EXPECT_NEAR(w.value(0, 1), -0.9, 1e-9);
}

TEST(AdamW, DecoupledDecayAndLayerScaling) {
  Parameter<double> deep("deep", 1, 1), head("head", 1, 1), bias("bias", 1, 1, false);
  deep.depth = 2;
  for (auto* p : {&deep, &head, &bias}) {
    p->value << 1.0;
    p->grad << 0.0;
  }
  AdamW<double> opt(AdamWConfig{0.9, 0.999, 1e-12, 0.1, 0.5});
  opt.step({&deep, &head, &bias}, 0.1);
  EXPECT_NEAR(head.value(0, 0), 1.0 - 0.1 * 0.1, 1e-12);
  EXPECT_NEAR(deep.value(0, 0), 1.0 - 0.025 * 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(bias.value(0, 0), 1.0);
}

TEST(TrainConfig, ParsesFileAndOverrides) {
  std::istringstream in("# comment\nepochs = 3\nlearning_rate=1e-3 # trailing\nencoder = random-test\n\nqualifier_bias = false\n");
  TrainConfig cfg;
  apply_config_text(cfg, in);
  EXPECT_EQ(cfg.epochs, 3);
  EXPECT_DOUBLE_EQ(cfg.learning_rate, 1e-3);
  EXPECT_EQ(cfg.encoder.backend, EncoderBackend::RandomTest);
  EXPECT_FALSE(cfg.qualifier_bias);
  apply_override(cfg, "prune_threshold=7");
  EXPECT_EQ(cfg.prune_threshold, 7);
  EXPECT_THROW(apply_override(cfg, "no_such_key=1"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "epochs=three"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "epochs"), ConfigError);
  std::istringstream bad("epochs 3\n");
  EXPECT_THROW(apply_config_text(cfg, bad), ParseError);
  cfg.warmup_fraction = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TrainConfig, DefaultsMatchDocumentedValues) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.epochs, 30);
  EXPECT_EQ(cfg.batch_size, 32);
  EXPECT_DOUBLE_EQ(cfg.learning_rate, 5e-5);
  EXPECT_DOUBLE_EQ(cfg.warmup_fraction, 0.2);
  EXPECT_EQ(cfg.prune_threshold, 20);
  EXPECT_DOUBLE_EQ(cfg.layer_decay, 0.9);
  EXPECT_DOUBLE_EQ(cfg.adam_epsilon, 1e-12);
  EXPECT_DOUBLE_EQ(cfg.weight_decay, 1e-5);
  EXPECT_EQ(cfg.pair_size, 150);
}

TEST(Batching, SubsampleAndBuckets) {
  const auto corpus = generate(default_template_spec(50, 3)).sentences;
  const auto half = subsample(corpus, 0.5, 1);
  EXPECT_EQ(half.size(), 25u);
  EXPECT_EQ(half, subsample(corpus, 0.5, 1));
  EXPECT_NE(half, subsample(corpus, 0.5, 2));
  const auto batches = length_buckets(corpus, 8);
  EXPECT_EQ(batches.size(), 7u);
  std::size_t total = 0, prev_max = 0;
  for (const auto& b : batches) {
    total += b.size();
    std::size_t lo = 1000, hi = 0;
    for (auto i : b) lo = std::min(lo, corpus[i].tokens.size()), hi = std::max(hi, corpus[i].tokens.size());
    EXPECT_GE(lo, prev_max);
    prev_max = hi;
  }
  EXPECT_EQ(total, corpus.size());
}

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.encoder.backend = EncoderBackend::RandomTest;
  cfg.encoder.hidden_size = 16;
  cfg.pair_hidden = 24;
  cfg.pair_size = 24;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-3;
  return cfg;
}

}  // namespace

TEST(Trainer, DeterministicLossTrajectory) {
  const auto corpus = generate(default_template_spec(24, 5)).sentences;
  const auto a = train<float>(corpus, corpus, tiny_config());
  const auto b = train<float>(corpus, corpus, tiny_config());
  ASSERT_EQ(a.step_losses.size(), 18u);
  EXPECT_EQ(a.step_losses, b.step_losses);
  EXPECT_EQ(a.epoch_dev_f1, b.epoch_dev_f1);
  EXPECT_LT(a.step_losses.back(), a.step_losses.front());
}

TEST(Trainer, LogsAndKeepsFirstBestEpoch) {
  const auto corpus = generate(default_template_spec(16, 5)).sentences;
  std::ostringstream log;
  TrainHooks hooks;
  hooks.log = &log;
  const auto ck = train<float>(corpus, corpus, tiny_config(), hooks);
  std::istringstream lines(log.str());
  int step_lines = 0, epoch_lines = 0;
  for (std::string line; std::getline(lines, line);) {
    const json j = json::parse(line);
    j.contains("step") ? ++step_lines : ++epoch_lines;
  }
  EXPECT_EQ(step_lines, 12);
  EXPECT_EQ(epoch_lines, 3);
  const auto best = std::max_element(ck.epoch_dev_f1.begin(), ck.epoch_dev_f1.end());
  EXPECT_EQ(ck.epoch, 1 + static_cast<int>(best - ck.epoch_dev_f1.begin()));
  EXPECT_DOUBLE_EQ(ck.dev_f1, *best);
}

TEST(Trainer, DivergenceIsReportedWithDump) {
  const auto corpus = generate(default_template_spec(8, 5)).sentences;
  TrainConfig cfg = tiny_config();
  cfg.learning_rate = 1e30;
  cfg.grad_clip = 0.0;
  cfg.epochs = 20;
  TrainHooks hooks;
  hooks.divergence_dump = std::filesystem::temp_directory_path() / "cubere_divergence.json";
  std::filesystem::remove(hooks.divergence_dump);
  EXPECT_THROW(train<float>(corpus, corpus, cfg, hooks), DivergenceError);
  EXPECT_TRUE(std::filesystem::exists(hooks.divergence_dump));
  std::filesystem::remove(hooks.divergence_dump);
}

TEST(Checkpoint, RoundtripIsBitIdentical) {
  const auto corpus = generate(default_template_spec(12, 5)).sentences;
  auto ck = train<float>(corpus, corpus, tiny_config());
  const auto path = std::filesystem::temp_directory_path() / "cubere_test.ckpt";
  save_checkpoint(path, *ck.model, ck.meta());
  const auto loaded = load_checkpoint<float>(path);
  const auto a = ck.model->parameters();
  const auto b = loaded.model->parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_EQ(std::memcmp(a[i]->value.data(), b[i]->value.data(), sizeof(float) * a[i]->value.size()), 0);
  }
  EXPECT_EQ(loaded.meta.epoch, ck.epoch);
  EXPECT_DOUBLE_EQ(loaded.meta.dev_f1, ck.dev_f1);
  EXPECT_EQ(loaded.model->vocab(), ck.model->vocab());
  for (const auto& s : corpus) EXPECT_EQ(loaded.model->predict(s.tokens), ck.model->predict(s.tokens));
  EXPECT_THROW(load_checkpoint<double>(path), ConfigError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignFiles) {
  const auto path = std::filesystem::temp_directory_path() / "cubere_not_a_ckpt.bin";
  std::ofstream(path) << "hello world, definitely not a checkpoint";
  EXPECT_THROW(load_checkpoint<float>(path), ParseError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint<float>(path), IoError);
}

TEST(Predict, LongSentencesAreTruncated) {
  const auto corpus = generate(default_template_spec(8, 5)).sentences;
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  auto ck = train<float>(corpus, corpus, cfg);
  Sentence long_one;
  for (int i = 0; i < 100; ++i) long_one.tokens.push_back("w" + std::to_string(i));
  std::size_t truncated = 0;
  const auto out = predict_corpus(*ck.model, Corpus{long_one}, {}, &truncated);
  EXPECT_EQ(truncated, 1u);
  for (const auto& f : out[0]) EXPECT_LE(f.fact.value.end, 80);
}

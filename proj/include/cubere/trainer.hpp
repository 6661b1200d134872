#pragma once

// Training loop: length-bucketed batches, AdamW with linear warmup/decay,
// global-norm clipping, per-epoch dev evaluation and best-dev selection.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cubere/evaluator.hpp"
#include "cubere/model.hpp"
#include "cubere/optim.hpp"

namespace cubere {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 5e-5;
  double warmup_fraction = 0.20;
  int prune_threshold = kDefaultPruneThreshold;
  double layer_decay = 0.9;
  double adam_epsilon = 1e-12;
  double weight_decay = 1e-5;
  std::uint64_t seed = 42;
  double train_fraction = 1.0;
  double grad_clip = 1.0;
  bool union_gold_indices = false;
  // Stops once dev F1 reaches this value; disabled when absent.
  std::optional<double> stop_at_dev_f1;

  EncoderConfig encoder;
  int pair_hidden = kDefaultPairSize;
  int pair_size = kDefaultPairSize;
  EntityScoreMode entity_score = EntityScoreMode::EntityProbability;
  bool qualifier_bias = true;
  DecodeThresholds thresholds;

  ScorerConfig scorer_config() const {
    ScorerConfig c;
    c.pair_hidden = pair_hidden;
    c.pair_size = pair_size;
    c.prune_threshold = prune_threshold;
    c.entity_score = entity_score;
    c.qualifier_bias = qualifier_bias;
    return c;
  }

  void validate() const {
    if (epochs <= 0 || batch_size <= 0 || prune_threshold <= 0) throw ConfigError("epochs, batch_size and prune_threshold must be positive");
    if (!(learning_rate > 0) || !(adam_epsilon > 0) || weight_decay < 0 || !(layer_decay > 0))
      throw ConfigError("learning_rate, adam_epsilon and layer_decay must be positive; weight_decay non-negative");
    if (warmup_fraction < 0 || warmup_fraction >= 1) throw ConfigError("warmup_fraction must lie in [0, 1)");
    if (!(train_fraction > 0) || train_fraction > 1) throw ConfigError("train_fraction must lie in (0, 1]");
    encoder.validate();
    scorer_config().validate();
  }

  // Applies one `key=value` setting. Keys are the documented config keys.
  void set(const std::string& key, const std::string& value) {
    auto as_int = [&] {
      try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return static_cast<int>(v);
      } catch (const std::logic_error&) {
        throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
      }
    };
    auto as_double = [&] {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::logic_error&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
      }
    };
    auto as_bool = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw ConfigError("config key '" + key + "' expects true/false, got '" + value + "'");
    };
    if (key == "epochs") epochs = as_int();
    else if (key == "batch_size") batch_size = as_int();
    else if (key == "learning_rate") learning_rate = as_double();
    else if (key == "warmup_fraction") warmup_fraction = as_double();
    else if (key == "prune_threshold") prune_threshold = as_int();
    else if (key == "layer_decay") layer_decay = as_double();
    else if (key == "adam_epsilon") adam_epsilon = as_double();
    else if (key == "weight_decay") weight_decay = as_double();
    else if (key == "seed") seed = static_cast<std::uint64_t>(as_int()), encoder.seed = seed;
    else if (key == "train_fraction") train_fraction = as_double();
    else if (key == "grad_clip") grad_clip = as_double();
    else if (key == "union_gold_indices") union_gold_indices = as_bool();
    else if (key == "stop_at_dev_f1") stop_at_dev_f1 = as_double();
    else if (key == "encoder") encoder.backend = parse_backend(value);
    else if (key == "model_id") encoder.model_id = value;
    else if (key == "hidden_size") encoder.hidden_size = as_int();
    else if (key == "pooling") encoder.pooling = parse_pooling(value);
    else if (key == "max_words") encoder.max_words = static_cast<std::size_t>(as_int());
    else if (key == "pair_hidden") pair_hidden = as_int();
    else if (key == "pair_size") pair_size = as_int();
    else if (key == "entity_score") entity_score = parse_entity_score_mode(value);
    else if (key == "qualifier_bias") qualifier_bias = as_bool();
    else if (key == "relation_threshold") thresholds.relation = as_double();
    else if (key == "qualifier_threshold") thresholds.qualifier = as_double();
    else throw ConfigError("unknown config key '" + key + "'");
  }

  json to_json() const {
    json j{{"epochs", epochs},
           {"batch_size", batch_size},
           {"learning_rate", learning_rate},
           {"warmup_fraction", warmup_fraction},
           {"prune_threshold", prune_threshold},
           {"layer_decay", layer_decay},
           {"adam_epsilon", adam_epsilon},
           {"weight_decay", weight_decay},
           {"seed", seed},
           {"train_fraction", train_fraction},
           {"grad_clip", grad_clip},
           {"union_gold_indices", union_gold_indices},
           {"encoder", encoder.to_json()},
           {"scorer", scorer_config().to_json()},
           {"relation_threshold", thresholds.relation},
           {"qualifier_threshold", thresholds.qualifier}};
    j["stop_at_dev_f1"] = stop_at_dev_f1 ? json(*stop_at_dev_f1) : json(nullptr);
    return j;
  }
};

// Flat `key = value` lines; `#` starts a comment.
inline void apply_config_text(TrainConfig& cfg, std::istream& in, const std::string& origin = "config") {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  TrainConfig cfg;
  apply_config_text(cfg, in, path.string());
  return cfg;
}

inline void apply_override(TrainConfig& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
  cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
}

// Deterministic subsample of ceil(fraction * n) sentences, original order kept.
inline Corpus subsample(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (fraction >= 1.0) return corpus;
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(std::ceil(fraction * double(corpus.size()))));
  std::sort(idx.begin(), idx.end());
  Corpus out;
  for (auto i : idx) out.push_back(corpus[i]);
  return out;
}

// Batches of similar-length sentences: indices sorted by length (stable),
// then cut into consecutive chunks.
inline std::vector<std::vector<std::size_t>> length_buckets(const Corpus& corpus, int batch_size) {
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return corpus[a].tokens.size() < corpus[b].tokens.size(); });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t s = 0; s < idx.size(); s += static_cast<std::size_t>(batch_size))
    batches.emplace_back(idx.begin() + s, idx.begin() + std::min(idx.size(), s + batch_size));
  return batches;
}

template <typename T>
std::vector<std::vector<DecodedFact>> predict_corpus(const CubeModel<T>& model, const Corpus& corpus,
                                                     const DecodeThresholds& thresholds = {},
                                                     std::size_t* truncated = nullptr) {
  std::vector<std::vector<DecodedFact>> out;
  out.reserve(corpus.size());
  const std::size_t limit = model.encoder().config().max_words;
  for (const auto& s : corpus) {
    if (s.tokens.size() > limit) {
      if (truncated) ++*truncated;
      std::vector<std::string> head(s.tokens.begin(), s.tokens.begin() + static_cast<std::ptrdiff_t>(limit));
      out.push_back(model.predict(head, thresholds));
    } else {
      out.push_back(model.predict(s.tokens, thresholds));
    }
  }
  return out;
}

template <typename T>
double dev_f1(const CubeModel<T>& model, const Corpus& dev, const DecodeThresholds& thresholds = {}) {
  return score_strict(facts_of(predict_corpus(model, dev, thresholds)), dev).f1();
}

// Result of a training run: the best-dev model and its bookkeeping.
template <typename T>
struct Checkpoint {
  std::unique_ptr<CubeModel<T>> model;
  TrainConfig config;
  double dev_f1 = 0.0;
  int epoch = 0;
  std::vector<double> epoch_dev_f1;
  std::vector<double> step_losses;

  CheckpointMeta meta() const { return CheckpointMeta{config.to_json(), dev_f1, epoch}; }
};

struct TrainHooks {
  std::ostream* log = nullptr;                             // line-delimited JSON
  std::filesystem::path divergence_dump;                   // written on non-finite loss
  std::function<void(int epoch, double dev_f1)> on_epoch;  // progress callback
};

template <typename T>
Checkpoint<T> train(const Corpus& train_corpus, const Corpus& dev_corpus, TrainConfig config, const TrainHooks& hooks = {}) {
  config.validate();
  const Corpus train_set = subsample(train_corpus, config.train_fraction, config.seed);
  if (train_set.empty()) throw ConfigError("training corpus is empty");
  LabelVocab vocab = build_vocab(train_set);
  config.encoder.seed = config.seed;

  auto model = std::make_unique<CubeModel<T>>(make_encoder<T>(config.encoder), config.scorer_config(), vocab, config.seed);
  const auto params = model->parameters();
  AdamW<T> opt(AdamWConfig{0.9, 0.999, config.adam_epsilon, config.weight_decay, config.layer_decay});

  auto batches = length_buckets(train_set, config.batch_size);
  const std::size_t total = batches.size() * static_cast<std::size_t>(config.epochs);
  const LinearWarmupSchedule schedule(config.learning_rate, total, config.warmup_fraction);
  std::mt19937_64 rng(config.seed ^ 0xB5AD4ECEDA1CE2A9ULL);

  Checkpoint<T> best;
  best.config = config;
  best.dev_f1 = -1.0;
  std::vector<std::pair<Parameter<T>*, Mat<T>>> best_values;
  for (auto* p : params) best_values.emplace_back(p, p->value);

  std::size_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(batches.begin(), batches.end(), rng);
    for (const auto& batch : batches) {
      ++step;
      model->zero_grad();
      LossReport sum;
      StepOptions opts{config.union_gold_indices, 1.0 / double(batch.size())};
      for (auto idx : batch) {
        const auto r = model->accumulate(train_set[idx], opts);
        sum.table += r.table / double(batch.size());
        sum.qualifier += r.qualifier / double(batch.size());
        sum.dropped_gold_cells += r.dropped_gold_cells;
      }
      sum.total = total_loss(sum.table, sum.qualifier);
      const double lr = schedule.at(step);
      if (!std::isfinite(sum.total)) {
        if (!hooks.divergence_dump.empty()) {
          json dump{{"step", step}, {"epoch", epoch}, {"table_loss", sum.table}, {"qualifier_loss", sum.qualifier},
                    {"learning_rate", lr}, {"config", config.to_json()}};
          json norms = json::object();
          for (auto* p : params) norms[p->name] = double(p->value.template cast<double>().norm());
          dump["parameter_norms"] = std::move(norms);
          std::ofstream(hooks.divergence_dump) << dump.dump(2) << '\n';
        }
        throw DivergenceError("non-finite loss at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) + ")");
      }
      const double norm = clip_grad_norm(params, config.grad_clip);
      opt.step(params, lr);
      best.step_losses.push_back(sum.total);
      if (hooks.log)
        *hooks.log << json{{"step", step}, {"epoch", epoch}, {"loss", sum.total}, {"table_loss", sum.table},
                           {"qualifier_loss", sum.qualifier}, {"learning_rate", lr}, {"grad_norm", norm},
                           {"dropped_gold_cells", sum.dropped_gold_cells}}.dump()
                   << '\n';
    }
    const double f1 = dev_f1(*model, dev_corpus, config.thresholds);
    best.epoch_dev_f1.push_back(f1);
    const bool improved = f1 > best.dev_f1;
    if (improved) {
      best.dev_f1 = f1;
      best.epoch = epoch;
      for (auto& [p, v] : best_values) v = p->value;
    }
    if (hooks.log) *hooks.log << json{{"epoch", epoch}, {"dev_f1", f1}, {"best_dev_f1", best.dev_f1}}.dump() << '\n';
    if (hooks.on_epoch) hooks.on_epoch(epoch, f1);
    if (config.stop_at_dev_f1 && best.dev_f1 >= *config.stop_at_dev_f1) break;
  }
  for (auto& [p, v] : best_values) p->value = v;
  best.model = std::move(model);
  return best;
}

}  // namespace cubere

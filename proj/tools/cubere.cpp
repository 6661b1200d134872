// Command-line front end. Each subcommand loads inputs, calls one library
// operation and writes its artifact.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "cubere/cubere.hpp"

namespace fs = std::filesystem;
using namespace cubere;

namespace {

const std::vector<std::string> kSplits{"train", "dev", "test"};

// Analysis commands look at the data as released, without truncation.
LoadOptions analysis_options() {
  LoadOptions o;
  o.max_words = 0;
  return o;
}

void print_warnings(const LoadReport& report, const std::string& what) {
  for (const auto& w : report.warnings()) std::cerr << "warning: " << what << ": " << w << '\n';
}

Corpus load_with_warnings(const fs::path& path, const LoadOptions& opts = {}) {
  LoadReport report;
  Corpus c = load_corpus(path, opts, &report);
  print_warnings(report, path.string());
  return c;
}

// Named corpora from either a dataset directory (train/dev/test files) or
// explicit files.
std::vector<std::pair<std::string, Corpus>> load_inputs(const std::string& data_dir, const std::vector<std::string>& files,
                                                        const LoadOptions& opts) {
  std::vector<std::pair<std::string, Corpus>> out;
  if (!data_dir.empty()) {
    for (const auto& split : kSplits) out.emplace_back(split, load_with_warnings(split_path(data_dir, split), opts));
  }
  for (const auto& f : files) out.emplace_back(fs::path(f).stem().string(), load_with_warnings(f, opts));
  if (out.empty()) throw ConfigError("no input: pass --data DIR or --input FILE");
  return out;
}

Corpus concat(const std::vector<std::pair<std::string, Corpus>>& parts) {
  Corpus all;
  for (const auto& [_, c] : parts) all.insert(all.end(), c.begin(), c.end());
  return all;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

int report_error(const std::string& code, const std::string& message, const std::string& detail = {}) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
  std::cerr << "error (" << code << "): " << message << '\n';
  if (!detail.empty()) std::cerr << detail << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cubere: hyper-relational fact extraction by cube filling"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::uint64_t seed = 42;
  app.add_option("--seed", seed, "Seed for all randomness")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and write the best-dev checkpoint");
  std::string config_path, train_file, dev_file, data_dir, out_path = "model.ckpt", log_path;
  std::vector<std::string> overrides;
  std::optional<double> train_fraction;
  train_cmd->add_option("--config", config_path, "key = value config file");
  train_cmd->add_option("--data", data_dir, "Directory holding train and dev splits");
  train_cmd->add_option("--train", train_file, "Training corpus (JSONL)");
  train_cmd->add_option("--dev", dev_file, "Development corpus (JSONL)");
  train_cmd->add_option("--out", out_path, "Checkpoint path")->capture_default_str();
  train_cmd->add_option("--log", log_path, "Training log (JSONL); default <out>.log.jsonl");
  train_cmd->add_option("--set", overrides, "Config override key=value (repeatable)");
  train_cmd->add_option("--train-fraction", train_fraction, "Fraction of the training split to use");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Decode facts for a corpus with a checkpoint");
  std::string ckpt_path, input_path, output_path;
  std::optional<double> rel_threshold, qual_threshold;
  predict_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint path")->required();
  predict_cmd->add_option("--input", input_path, "Corpus to annotate (JSONL; facts ignored)")->required();
  predict_cmd->add_option("--output", output_path, "Predictions JSONL")->required();
  predict_cmd->add_option("--relation-threshold", rel_threshold, "Minimum relation confidence");
  predict_cmd->add_option("--qualifier-threshold", qual_threshold, "Minimum qualifier confidence");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against gold");
  std::string pred_path, gold_path, categories_path, report_path;
  eval_cmd->add_option("--pred", pred_path, "Predictions JSONL")->required();
  eval_cmd->add_option("--gold", gold_path, "Gold JSONL")->required();
  eval_cmd->add_option("--categories", categories_path, "Qualifier category map JSON, or 'default'");
  eval_cmd->add_option("--output", report_path, "Report JSON (default stdout)");

  // stats / sparsity / oracle-check share input flags
  std::vector<std::string> inputs;
  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  auto* sparsity_cmd = app.add_subcommand("sparsity", "Qualifier cube null fractions before and after pruning");
  auto* oracle_cmd = app.add_subcommand("oracle-check", "Fraction of gold facts the decoder recovers from gold cells");
  int prune_m = kDefaultPruneThreshold;
  for (auto* cmd : {stats_cmd, sparsity_cmd, oracle_cmd}) {
    cmd->add_option("--data", data_dir, "Directory holding train/dev/test splits");
    cmd->add_option("--input", inputs, "Corpus file (repeatable)");
    cmd->add_option("--output", report_path, "Report JSON (default stdout)");
  }
  sparsity_cmd->add_option("--m", prune_m, "Pruning threshold")->capture_default_str();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic template corpus");
  std::size_t synth_size = 200;
  double collision_rate = 0.0;
  std::string flags_path;
  synth_cmd->add_option("--size", synth_size, "Number of sentences")->capture_default_str();
  synth_cmd->add_option("--collision-rate", collision_rate, "Fraction of adjacent-cell sentences")->capture_default_str();
  synth_cmd->add_option("--output", output_path, "Corpus JSONL")->required();
  synth_cmd->add_option("--collisions", flags_path, "Optional JSON array of per-sentence collision flags");

  // cells
  auto* cells_cmd = app.add_subcommand("cells", "Dump gold table and qualifier cells of one sentence");
  std::size_t sentence_index = 0;
  cells_cmd->add_option("--input", input_path, "Corpus file")->required();
  cells_cmd->add_option("--index", sentence_index, "Sentence index")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), app.help());
  }

  try {
    if (*train_cmd) {
      TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
      if (app.get_option("--seed")->count()) cfg.set("seed", std::to_string(seed));
      for (const auto& kv : overrides) apply_override(cfg, kv);
      if (train_fraction) cfg.train_fraction = *train_fraction;
      LoadOptions opts;
      opts.max_words = cfg.encoder.max_words;
      if (!data_dir.empty()) {
        if (train_file.empty()) train_file = split_path(data_dir, "train").string();
        if (dev_file.empty()) dev_file = split_path(data_dir, "dev").string();
      }
      if (train_file.empty() || dev_file.empty()) throw ConfigError("train needs --data or both --train and --dev");
      const Corpus train_set = load_with_warnings(train_file, opts);
      const Corpus dev_set = load_with_warnings(dev_file, opts);
      if (log_path.empty()) log_path = out_path + ".log.jsonl";
      std::ofstream log(log_path);
      if (!log) throw IoError("cannot write " + log_path);
      TrainHooks hooks;
      hooks.log = &log;
      hooks.divergence_dump = out_path + ".divergence.json";
      hooks.on_epoch = [](int epoch, double f1) { std::cerr << "epoch " << epoch << " dev strict F1 " << f1 << '\n'; };
      auto ck = train<float>(train_set, dev_set, cfg, hooks);
      save_checkpoint(out_path, *ck.model, ck.meta());
      std::cout << json{{"checkpoint", out_path}, {"log", log_path}, {"best_epoch", ck.epoch}, {"dev_f1", ck.dev_f1}}.dump()
                << '\n';
    } else if (*predict_cmd) {
      auto loaded = load_checkpoint<float>(ckpt_path);
      DecodeThresholds th;
      const auto& tc = loaded.meta.train_config;
      th.relation = rel_threshold.value_or(tc.value("relation_threshold", 0.0));
      th.qualifier = qual_threshold.value_or(tc.value("qualifier_threshold", 0.0));
      const Corpus input = load_with_warnings(input_path, analysis_options());
      std::size_t truncated = 0;
      const auto preds = predict_corpus(*loaded.model, input, th, &truncated);
      if (truncated)
        std::cerr << "warning: " << truncated << " sentence(s) longer than "
                  << loaded.model->encoder().config().max_words << " words were truncated before prediction\n";
      std::ofstream out(output_path);
      if (!out) throw IoError("cannot write " + output_path);
      for (std::size_t i = 0; i < input.size(); ++i) out << prediction_to_json(input[i].tokens, preds[i]).dump() << '\n';
    } else if (*eval_cmd) {
      const Corpus pred = load_with_warnings(pred_path, analysis_options());
      const Corpus gold = load_with_warnings(gold_path, analysis_options());
      std::optional<CategoryMap> cats;
      if (categories_path == "default")
        cats = default_category_map();
      else if (!categories_path.empty())
        cats = load_category_map(categories_path);
      const auto result = evaluate(facts_of(pred), gold, cats ? &*cats : nullptr);
      std::cerr << format_report(result);
      write_json(report_path, result.to_json());
    } else if (*stats_cmd) {
      const auto parts = load_inputs(data_dir, inputs, analysis_options());
      json j = json::object();
      for (const auto& [name, c] : parts) j[name] = corpus_stats(c).to_json();
      const Corpus all = concat(parts);
      j["all"] = corpus_stats(all).to_json();
      write_json(report_path, j);
    } else if (*sparsity_cmd) {
      const Corpus all = concat(load_inputs(data_dir, inputs, analysis_options()));
      write_json(report_path, qualifier_sparsity(all, build_vocab(all), prune_m).to_json());
    } else if (*oracle_cmd) {
      const Corpus all = concat(load_inputs(data_dir, inputs, analysis_options()));
      write_json(report_path, oracle_roundtrip(all, build_vocab(all)).to_json());
    } else if (*synth_cmd) {
      const auto syn = generate(default_template_spec(synth_size, seed, collision_rate));
      save_corpus(output_path, syn.sentences);
      if (!flags_path.empty()) write_json(flags_path, json(syn.collision));
    } else if (*cells_cmd) {
      const Corpus c = load_with_warnings(input_path, analysis_options());
      if (sentence_index >= c.size()) throw ConfigError("sentence index out of range");
      const auto& s = c[sentence_index];
      const LabelVocab v = build_vocab(c);
      ConflictReport conflicts;
      json j = cells_to_json(build_table_labels(s, v, &conflicts), build_qualifier_cells(s, v, &conflicts));
      j["tokens"] = s.tokens;
      j["vocab"] = v.to_json();
      j["table_conflicts"] = conflicts.table_conflicts;
      j["qualifier_conflicts"] = conflicts.qualifier_conflicts;
      write_json("", j);
    }
  } catch (const cubere::Error& e) {
    return report_error(e.code(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}

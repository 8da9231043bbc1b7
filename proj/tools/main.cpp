// pricefusion command-line front end.
//
//   pricefusion synth      --out DIR [--mode unimodal|multimodal] [--n N] [--seed S]
//   pricefusion preprocess --csv FILE [--image-dir DIR | --image-stack FILE] --out DIR
//   pricefusion train      --dataset DIR --model M --out CKPT [--embeddings FILE]
//   pricefusion evaluate   --dataset DIR --checkpoint CKPT --classifiers all --out DIR
//   pricefusion embed      --dataset DIR --checkpoint CKPT --out DIR [--dump-activations]
//   pricefusion visualize  --dataset DIR --checkpoint CKPT --out FILE.csv
//
// Every flag is a shorthand for a key=value setting; --config reads a file of
// such settings first and --set KEY=VALUE applies any of them by name.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pricefusion/harness.hpp"
#include "pricefusion/tabular.hpp"
#include "pricefusion/tensor_io.hpp"
#include "pricefusion/training.hpp"

namespace {

using pricefusion::ExperimentConfig;

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

const std::vector<FlagSpec> kCommonFlags = {
    {"--seed", "seed", "seed for initialization, shuffling and generation"},
};

const std::map<std::string, std::vector<FlagSpec>> kCommandFlags = {
    {"synth",
     {{"--out", "out", "output dataset directory"},
      {"--mode", "synth_mode", "unimodal or multimodal"},
      {"--n", "synth_n", "number of records (>= 40)"},
      {"--split-ratio", "split_ratio", "train fraction of the stratified split"},
      {"--split-seed", "split_seed", "seed of the stratified split"}}},
    {"preprocess",
     {{"--csv", "csv", "source CSV"},
      {"--image-dir", "image_dir", "directory holding the images named in the CSV"},
      {"--image-stack", "image_stack", "PFT1 image stack [R,H,W,3] keyed by CSV row"},
      {"--image-size", "image_size", "square side images are resized to"},
      {"--out", "out", "output dataset directory"},
      {"--split-ratio", "split_ratio", "train fraction of the stratified split"},
      {"--split-seed", "split_seed", "seed of the stratified split"}}},
    {"train",
     {{"--dataset", "dataset", "prepared dataset directory"},
      {"--model", "model", "model id 1-5"},
      {"--out", "out", "checkpoint directory"},
      {"--embeddings", "embeddings", "external image embeddings [R,E] for model 2"},
      {"--epochs", "epochs", "training epochs"},
      {"--lr", "learning_rate", "RMSProp learning rate"},
      {"--batch-size", "batch_size", "mini-batch size"},
      {"--l1", "l1_alpha", "L1 penalty weight"},
      {"--l1-scope", "l1_scope", "output or all"}}},
    {"evaluate",
     {{"--dataset", "dataset", "prepared dataset directory"},
      {"--checkpoint", "checkpoint", "checkpoint directory"},
      {"--classifiers", "classifiers", "comma list of logreg,knn,tree,svm,fc or 'all'"},
      {"--embeddings", "embeddings", "external image embeddings for model 2"},
      {"--out", "out", "report directory"},
      {"--k", "knn_k", "neighbours for KNN"}}},
    {"embed",
     {{"--dataset", "dataset", "prepared dataset directory"},
      {"--checkpoint", "checkpoint", "checkpoint directory"},
      {"--embeddings", "embeddings", "external image embeddings for model 2"},
      {"--out", "out", "output directory"}}},
    {"visualize",
     {{"--dataset", "dataset", "prepared dataset directory"},
      {"--checkpoint", "checkpoint", "checkpoint directory"},
      {"--embeddings", "embeddings", "external image embeddings for model 2"},
      {"--out", "out", "output CSV"}}},
};

struct Sub {
  CLI::App* app = nullptr;
  std::string config;
  std::vector<std::string> sets;
  bool dump = false;
  std::vector<std::pair<std::string, CLI::Option*>> flags;
  std::map<std::string, std::string> values;
};

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int fail(const std::string& category, const std::string& message, int code) {
  std::cerr << "pricefusion: error: " << category << ": " << one_line(message) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cellphone price-class prediction with multimodal late fusion"};
  app.require_subcommand(1);
  std::map<std::string, Sub> subs;
  for (const auto& [name, flags] : kCommandFlags) {
    Sub& s = subs[name];
    s.app = app.add_subcommand(name);
    s.app->add_option("--config", s.config, "key=value settings file applied before flags");
    s.app->add_option("--set", s.sets, "KEY=VALUE setting (repeatable)");
    for (const auto* list : {&kCommonFlags, &flags}) {
      for (const auto& f : *list) {
        s.values[f.key];
        s.flags.emplace_back(f.key, s.app->add_option(f.flag, s.values[f.key], f.help));
      }
    }
    if (name == "embed") s.app->add_flag("--dump-activations", s.dump, "write per-layer activations of one sample");
  }
  subs["synth"].app->description("Write a seeded synthetic dataset");
  subs["preprocess"].app->description("Encode a cellphone CSV (and images) into a dataset");
  subs["train"].app->description("Train model 1-5 and write a checkpoint with its loss trace");
  subs["evaluate"].app->description("Score classifiers on the test split and write JSON/text reports");
  subs["embed"].app->description("Write fused embeddings as PFT1 tensors");
  subs["visualize"].app->description("Project fused embeddings to 2-D with PCA and write a CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    for (auto& [name, s] : subs) {
      if (!s.app->parsed()) continue;
      ExperimentConfig cfg;
      if (!s.config.empty()) cfg.load_file(s.config);
      for (const auto& kv : s.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw pricefusion::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      for (const auto& [key, opt] : s.flags) {
        if (opt->count() > 0) cfg.set(key, s.values[key]);
      }
      if (s.dump) cfg.dump_activations = true;

      std::string summary;
      if (name == "synth") summary = pricefusion::cmd_synth(cfg);
      else if (name == "preprocess") summary = pricefusion::cmd_preprocess(cfg);
      else if (name == "train") summary = pricefusion::cmd_train(cfg);
      else if (name == "evaluate") summary = pricefusion::cmd_evaluate(cfg);
      else if (name == "embed") summary = pricefusion::cmd_embed(cfg);
      else if (name == "visualize") summary = pricefusion::cmd_visualize(cfg);
      std::cout << summary << "\n";
    }
  } catch (const pricefusion::NotImplementedError& e) {
    return fail("not_implemented", e.what(), 6);
  } catch (const pricefusion::ConfigError& e) {
    return fail("config", e.what(), 2);
  } catch (const pricefusion::IoError& e) {
    return fail("io", e.what(), 3);
  } catch (const pricefusion::ShapeError& e) {
    return fail("data", e.what(), 4);
  } catch (const pricefusion::DataError& e) {
    return fail("data", e.what(), 4);
  } catch (const pricefusion::RecordError& e) {
    return fail("data", e.what(), 4);
  } catch (const pricefusion::TrainingError& e) {
    return fail("training", e.what(), 5);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}

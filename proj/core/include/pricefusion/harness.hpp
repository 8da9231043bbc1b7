#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pricefusion/classifiers.hpp"
#include "pricefusion/dataset.hpp"
#include "pricefusion/keyvalue.hpp"
#include "pricefusion/models.hpp"
#include "pricefusion/optim.hpp"

namespace pricefusion {

enum class SynthMode { Unimodal, Multimodal };
SynthMode parse_synth_mode(std::string_view text);
std::string_view synth_mode_name(SynthMode mode);

/// Settings shared by every command. Each field has a key=value name
/// (see `set`), so a config file and command-line overrides use one vocabulary.
struct ExperimentConfig {
  int model_id = 1;
  TrainingConfig training{};
  ArchConfig arch{};
  double split_ratio = 0.8;
  std::uint64_t split_seed = 0;
  std::vector<ClassifierKind> classifiers{ClassifierKind::FullyConnected};
  bool report_unimplemented = false;  ///< add a "not implemented" row for gradient boosting
  ClassifierParams classifier_params{};
  std::size_t image_size = 128;

  std::filesystem::path csv;
  std::filesystem::path image_dir;
  std::filesystem::path image_stack;
  std::filesystem::path embeddings;
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path out;

  SynthMode synth_mode = SynthMode::Unimodal;
  std::size_t synth_n = 2000;
  bool dump_activations = false;

  /// Applies one key=value setting; throws ConfigError on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  /// Reads a key=value file; relative paths are taken relative to the working directory.
  void load_file(const std::filesystem::path& path);
  /// Round-trippable key=value listing of every setting.
  KeyValueFile to_keyvalue() const;
  static const std::vector<std::string>& keys();
};

/// Raised for invalid input data (as opposed to invalid configuration).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Synthetic generator output before splitting.
struct SynthData {
  Tensor features;               ///< [n, 8]
  std::optional<Tensor> images;  ///< [n, 32, 32, 3] in multimodal mode
  std::optional<Tensor> embeddings;  ///< [n, 48] pooled image stand-in for Model 2
  std::vector<int> labels;
  std::vector<int> tabular_code;  ///< multimodal: the value encoded in column 0
  std::vector<int> quadrant;      ///< multimodal: blob quadrant (0 TL, 1 TR, 2 BL, 3 BR)
};

inline constexpr std::size_t kSynthFeatures = 8;
inline constexpr std::size_t kSynthImageSide = 32;

/// Multimodal labelling rule: the tabular code decides the class except in
/// quadrant 3, where the class is shifted by one.
int multimodal_label(int tabular_code, int quadrant);

SynthData generate_synth(SynthMode mode, std::size_t n, std::uint64_t seed);

/// Splits `source` into a dataset (row ids are generator indices).
Dataset synth_dataset(const SynthData& source, double split_ratio, std::uint64_t split_seed);

/// Each command returns a one-line summary for the console.
std::string cmd_preprocess(const ExperimentConfig& cfg);
std::string cmd_train(const ExperimentConfig& cfg);
std::string cmd_evaluate(const ExperimentConfig& cfg);
std::string cmd_embed(const ExperimentConfig& cfg);
std::string cmd_visualize(const ExperimentConfig& cfg);
std::string cmd_synth(const ExperimentConfig& cfg);

}  // namespace pricefusion

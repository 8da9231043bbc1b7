#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pricefusion/models.hpp"
#include "pricefusion/optim.hpp"

namespace pricefusion {

/// Model inputs and labels for one split. Rows of every present tensor agree.
struct TrainingData {
  Tensor tabular;                ///< [N, D]
  std::optional<Tensor> image;   ///< [N, H, W, C] or [N, E] embeddings
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  /// Throws ShapeError when row counts disagree.
  void validate() const;
  TrainingData subset(std::span<const std::size_t> rows) const;
};

/// Raised when training diverges.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;      ///< mean CE over samples plus alpha * L1
  double accuracy = 0.0;  ///< training accuracy during the epoch
};

struct TrainedModel {
  ModelGraph<float> model;
  TrainingConfig config;
  std::vector<EpochStats> trace;
};

/// Trains with seeded Fisher-Yates shuffling, mini-batch RMSProp and the
/// CE + L1 objective. The final short batch of each epoch is kept.
TrainedModel train(ModelGraph<float> model, const TrainingData& data, const TrainingConfig& cfg);

/// Per-row class probabilities [N, 4], evaluated in chunks.
Tensor predict_proba(const ModelGraph<float>& model, const TrainingData& data, std::size_t chunk = 256);
std::vector<int> predict_classes(const ModelGraph<float>& model, const TrainingData& data, std::size_t chunk = 256);
/// Activations at the fusion node, [N, fused_width].
Tensor extract_fused(const ModelGraph<float>& model, const TrainingData& data, std::size_t chunk = 256);

double accuracy(std::span<const int> truth, std::span<const int> predicted);

/// Writes manifest.txt plus one PFT1 file per parameter tensor.
void save_checkpoint(const std::filesystem::path& dir, const TrainedModel& trained);
TrainedModel load_checkpoint(const std::filesystem::path& dir);

/// Writes "epoch,loss,accuracy" rows with round-trip precision.
void write_loss_trace(const std::filesystem::path& path, const std::vector<EpochStats>& trace);

}  // namespace pricefusion

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pricefusion/keyvalue.hpp"
#include "pricefusion/tensor.hpp"
#include "pricefusion/training.hpp"

namespace pricefusion {

/// Rows of one split. `rows` holds source row ids, which key external embeddings.
struct DatasetSplit {
  Tensor features;              ///< [N, D]
  std::optional<Tensor> images; ///< [N, H, W, C]
  std::vector<int> labels;
  std::vector<std::size_t> rows;

  std::size_t size() const noexcept { return labels.size(); }
};

/**
 * On-disk layout of a prepared dataset directory:
 *
 *   manifest.txt                       key=value description (widths, counts, encoder)
 *   {train,test}_features.pft          [N, D]
 *   {train,test}_labels.txt            one class id per line
 *   {train,test}_rows.txt              source row id per line
 *   {train,test}_images.pft            [N, H, W, C] when images are present
 */
struct Dataset {
  KeyValueFile manifest;
  DatasetSplit train;
  DatasetSplit test;

  std::size_t feature_width() const noexcept { return train.features.rank() == 2 ? train.features.dim(1) : 0; }
  std::optional<Shape> image_shape() const;

  /// Fills the generic manifest keys (counts, widths) and writes every file.
  void save(const std::filesystem::path& dir);
  static Dataset load(const std::filesystem::path& dir);
  /// Throws ShapeError when row counts or widths disagree.
  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class seeded shuffle; round(ratio * n_c) rows of each class go to
/// train. Both index lists are returned in ascending order.
SplitIndices stratified_split(std::span<const int> labels, double train_ratio, std::uint64_t seed);

/// Model inputs for a split. `embeddings` is the externally supplied
/// [R, E] matrix keyed by source row (Model 2); otherwise images are used if present.
TrainingData model_inputs(const DatasetSplit& split, int model_id, const Tensor* embeddings = nullptr);

/// Gathers rows of an external embedding matrix by source row id.
Tensor gather_embeddings(const Tensor& embeddings, std::span<const std::size_t> rows);

std::string format_shape_hwc(const Shape& shape);
Shape parse_shape_hwc(const std::string& text);

void write_labels(const std::filesystem::path& path, std::span<const int> labels);
std::vector<int> read_labels(const std::filesystem::path& path);
void write_rows(const std::filesystem::path& path, std::span<const std::size_t> rows);
std::vector<std::size_t> read_rows(const std::filesystem::path& path);

}  // namespace pricefusion

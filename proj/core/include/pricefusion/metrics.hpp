#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pricefusion/optim.hpp"
#include "pricefusion/tensor.hpp"

namespace pricefusion {

/// 4x4 counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  static ConfusionMatrix from_predictions(std::span<const int> truth, std::span<const int> predicted);
  void add(int truth, int predicted);
  std::uint64_t total() const noexcept;
  std::uint64_t trace() const noexcept;
  std::uint64_t support(std::size_t cls) const noexcept;  ///< row sum
};

struct ClassMetrics {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::uint64_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::uint64_t total = 0;
  /// Cells whose denominator was zero and were defined as 0.
  std::uint64_t zero_division = 0;
  ConfusionMatrix confusion;
};

/// Precision, recall and F1 per class (one vs rest); macro averages over
/// classes with support > 0, support-weighted averages, accuracy = trace/total.
/// Throws std::invalid_argument on an empty matrix.
EvalReport compute_metrics(const ConfusionMatrix& cm);

/// One line of a classifier comparison table.
struct ReportRow {
  std::string classifier;
  std::optional<EvalReport> report;  ///< empty when the classifier did not run
  std::string status = "ok";         ///< "ok" or the reason it did not run
};

struct ReportDocument {
  std::string title;
  std::string protocol;  ///< train/test protocol description
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<ReportRow> rows;
};

inline constexpr const char* kAveragingNote =
    "headline precision/recall/F1 are macro averages (unweighted mean over classes with support > 0); "
    "support-weighted averages are reported alongside";

/// Structured report following docs/report.schema.json.
std::string report_json(const ReportDocument& doc);
/// Aligned plain-text table: one row per classifier.
std::string report_text(const ReportDocument& doc);

struct PcaResult {
  Tensor projection;                     ///< [N, dims]
  Tensor64 components;                   ///< [F, dims], orthonormal columns
  std::vector<double> eigenvalues;       ///< covariance eigenvalues, descending
  std::vector<double> explained_ratio;   ///< eigenvalue / total variance (0 when the input is constant)
  std::vector<std::size_t> iterations;   ///< power iterations used per component
  std::vector<bool> converged;
};

/// Principal components by power iteration with deflation (tol 1e-9,
/// at most 10000 iterations, seeded start vectors). Each component's
/// largest-magnitude coordinate is made positive.
PcaResult pca_project(const Tensor& x, std::size_t dims = 2, std::uint64_t seed = 0);

/// Mean silhouette of `points` [N, d] under `labels` (Euclidean).
/// Points whose class has a single member score 0.
double mean_silhouette(const Tensor& points, std::span<const int> labels);

}  // namespace pricefusion

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pricefusion/models.hpp"
#include "pricefusion/optim.hpp"
#include "pricefusion/tensor.hpp"

namespace pricefusion {

enum class ClassifierKind { LogisticRegression, KNN, DecisionTree, LinearSVM, FullyConnected, GradientBoosting };

/// Display name used in reports ("Logistic Regression", "KNN", ...).
std::string_view classifier_name(ClassifierKind kind);
/// Short identifier used on the command line ("logreg", "knn", "tree", "svm", "fc", "gboost").
std::string_view classifier_id(ClassifierKind kind);
/// Accepts either form, case-insensitively. Throws ConfigError.
ClassifierKind parse_classifier_kind(std::string_view text);
/// Every kind that can be fitted, in report order.
const std::vector<ClassifierKind>& implemented_classifiers();

class NotImplementedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClassifierParams {
  std::size_t k = 5;
  std::size_t max_depth = 10;
  std::size_t min_leaf = 2;
  std::size_t epochs = 500;
  double learning_rate = 0.01;
  double l2 = 1e-4;
  /// Training settings for the fully-connected classifier.
  TrainingConfig head{};
  ArchConfig head_arch{};
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ClassifierKind kind() const = 0;

  /// X is [N, F]; labels in {0,1,2,3}.
  virtual void fit(const Tensor& x, std::span<const int> y) = 0;
  virtual int predict_row(std::span<const float> row) const = 0;
  std::vector<int> predict(const Tensor& x) const;

  std::size_t input_width() const noexcept { return width_; }
  bool fitted() const noexcept { return width_ != 0; }

  /// Writes manifest.txt plus kind-specific payload files.
  virtual void save(const std::filesystem::path& dir) const = 0;

 protected:
  void check_fit_input(const Tensor& x, std::span<const int> y) const;
  void check_row(std::span<const float> row) const;
  std::size_t width_ = 0;
};

std::unique_ptr<Classifier> make_classifier(ClassifierKind kind, const ClassifierParams& params = {});
std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& dir);

/// One-vs-rest logistic regression by full-batch gradient descent with L2.
class LogisticRegression final : public Classifier {
 public:
  explicit LogisticRegression(const ClassifierParams& params = {});
  ClassifierKind kind() const override { return ClassifierKind::LogisticRegression; }
  void fit(const Tensor& x, std::span<const int> y) override;
  int predict_row(std::span<const float> row) const override;
  void save(const std::filesystem::path& dir) const override;
  static std::unique_ptr<LogisticRegression> load(const std::filesystem::path& dir);

  /// Per-class linear scores w_c . x + b_c.
  std::vector<double> scores(std::span<const float> row) const;
  const Tensor64& weights() const noexcept { return weights_; }
  const Tensor64& bias() const noexcept { return bias_; }

 private:
  ClassifierParams params_;
  Tensor64 weights_;  // [4, F]
  Tensor64 bias_;     // [4]
};

/// One-vs-rest linear SVM: subgradient descent on the L2-regularized hinge
/// loss. The returned model is the running average of the iterates.
class LinearSVM final : public Classifier {
 public:
  explicit LinearSVM(const ClassifierParams& params = {});
  ClassifierKind kind() const override { return ClassifierKind::LinearSVM; }
  void fit(const Tensor& x, std::span<const int> y) override;
  int predict_row(std::span<const float> row) const override;
  void save(const std::filesystem::path& dir) const override;
  static std::unique_ptr<LinearSVM> load(const std::filesystem::path& dir);

  std::vector<double> scores(std::span<const float> row) const;
  /// Summed one-vs-rest objective of the averaged iterate after each epoch.
  const std::vector<double>& objective_trace() const noexcept { return objective_; }

 private:
  ClassifierParams params_;
  Tensor64 weights_;
  Tensor64 bias_;
  std::vector<double> objective_;
};

/// Lazy k-nearest-neighbour vote by Euclidean distance. Equidistant points
/// are taken in stored order; vote ties go to the smallest class.
class KNearestNeighbors final : public Classifier {
 public:
  explicit KNearestNeighbors(const ClassifierParams& params = {});
  ClassifierKind kind() const override { return ClassifierKind::KNN; }
  void fit(const Tensor& x, std::span<const int> y) override;
  int predict_row(std::span<const float> row) const override;
  void save(const std::filesystem::path& dir) const override;
  static std::unique_ptr<KNearestNeighbors> load(const std::filesystem::path& dir);

  const Tensor& stored_points() const noexcept { return points_; }
  const std::vector<int>& stored_labels() const noexcept { return labels_; }
  std::size_t k() const noexcept { return k_; }

 private:
  std::size_t k_;
  Tensor points_;
  std::vector<int> labels_;
};

/// CART tree on Gini impurity. Pure nodes are never split; an impure node
/// takes its best split even when that split does not lower impurity.
class DecisionTree final : public Classifier {
 public:
  struct Node {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;  ///< go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    int leaf_class = 0;
    std::size_t samples = 0;
  };

  explicit DecisionTree(const ClassifierParams& params = {});
  ClassifierKind kind() const override { return ClassifierKind::DecisionTree; }
  void fit(const Tensor& x, std::span<const int> y) override;
  int predict_row(std::span<const float> row) const override;
  void save(const std::filesystem::path& dir) const override;
  static std::unique_ptr<DecisionTree> load(const std::filesystem::path& dir);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t depth() const;

 private:
  int grow(const Tensor& x, std::span<const int> y, std::vector<std::size_t>& rows, std::size_t depth);

  ClassifierParams params_;
  std::vector<Node> nodes_;
};

/// Dense 300/120 ReLU network with a softmax head, trained with the model
/// training loop on the given features.
class FullyConnectedClassifier final : public Classifier {
 public:
  explicit FullyConnectedClassifier(const ClassifierParams& params = {});
  ClassifierKind kind() const override { return ClassifierKind::FullyConnected; }
  void fit(const Tensor& x, std::span<const int> y) override;
  int predict_row(std::span<const float> row) const override;
  void save(const std::filesystem::path& dir) const override;
  static std::unique_ptr<FullyConnectedClassifier> load(const std::filesystem::path& dir);

 private:
  ClassifierParams params_;
  std::optional<ModelGraph<float>> model_;
};

/// Per-column standardization (mean 0, variance 1) fit on training rows.
/// Constant columns are centred and left unscaled.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Tensor& x);
  Tensor transform(const Tensor& x) const;
};

}  // namespace pricefusion

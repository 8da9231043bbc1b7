#include "pricefusion/classifiers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pricefusion/keyvalue.hpp"
#include "pricefusion/tensor_io.hpp"
#include "pricefusion/training.hpp"

namespace pricefusion {
namespace {

constexpr std::size_t C = kNumClasses;

std::string lowered(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c);
  return out;
}

int argmax_first(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return static_cast<int>(best);
}

KeyValueFile manifest_for(const Classifier& c) {
  KeyValueFile kv;
  kv.set("format", std::string("pricefusion-classifier/1"));
  kv.set("kind", std::string(classifier_id(c.kind())));
  kv.set("input_width", static_cast<std::uint64_t>(c.input_width()));
  return kv;
}

void store_params(KeyValueFile& kv, const ClassifierParams& p) {
  kv.set("k", static_cast<std::uint64_t>(p.k));
  kv.set("max_depth", static_cast<std::uint64_t>(p.max_depth));
  kv.set("min_leaf", static_cast<std::uint64_t>(p.min_leaf));
  kv.set("epochs", static_cast<std::uint64_t>(p.epochs));
  kv.set("learning_rate", p.learning_rate);
  kv.set("l2", p.l2);
}

ClassifierParams restore_params(const KeyValueFile& kv) {
  ClassifierParams p;
  p.k = kv.get_uint("k");
  p.max_depth = kv.get_uint("max_depth");
  p.min_leaf = kv.get_uint("min_leaf");
  p.epochs = kv.get_uint("epochs");
  p.learning_rate = kv.get_double("learning_rate");
  p.l2 = kv.get_double("l2");
  return p;
}

KeyValueFile read_manifest(const std::filesystem::path& dir, ClassifierKind expected) {
  auto kv = KeyValueFile::load(dir / "manifest.txt");
  if (kv.get("format") != "pricefusion-classifier/1") throw IoError(dir.string() + ": unknown classifier format");
  if (parse_classifier_kind(kv.get("kind")) != expected) {
    throw IoError(dir.string() + ": classifier kind is " + kv.get("kind"));
  }
  return kv;
}

Tensor64 to_double(const Tensor& x) { return x.cast<double>(); }

double dot_row(const Tensor64& w, std::size_t c, std::span<const float> row) {
  const std::size_t f = row.size();
  double s = 0.0;
  for (std::size_t j = 0; j < f; ++j) s += w[c * f + j] * static_cast<double>(row[j]);
  return s;
}

double dot_row(const Tensor64& w, std::size_t c, const Tensor64& x, std::size_t i) {
  const std::size_t f = x.dim(1);
  double s = 0.0;
  for (std::size_t j = 0; j < f; ++j) s += w[c * f + j] * x[i * f + j];
  return s;
}

// Objective of one one-vs-rest hinge problem.
double hinge_objective(const Tensor64& w, const Tensor64& b, std::size_t c, const Tensor64& x,
                       std::span<const int> y, double l2) {
  const std::size_t n = x.dim(0), f = x.dim(1);
  double reg = 0.0;
  for (std::size_t j = 0; j < f; ++j) reg += w[c * f + j] * w[c * f + j];
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = y[i] == static_cast<int>(c) ? 1.0 : -1.0;
    loss += std::max(0.0, 1.0 - s * (dot_row(w, c, x, i) + b[c]));
  }
  return 0.5 * l2 * reg + loss / static_cast<double>(n);
}

}  // namespace

std::string_view classifier_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::LogisticRegression: return "Logistic Regression";
    case ClassifierKind::KNN: return "KNN";
    case ClassifierKind::DecisionTree: return "Decision Tree";
    case ClassifierKind::LinearSVM: return "SVM";
    case ClassifierKind::FullyConnected: return "Fully Connected";
    case ClassifierKind::GradientBoosting: return "Gradient Boosting";
  }
  return "?";
}

std::string_view classifier_id(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::LogisticRegression: return "logreg";
    case ClassifierKind::KNN: return "knn";
    case ClassifierKind::DecisionTree: return "tree";
    case ClassifierKind::LinearSVM: return "svm";
    case ClassifierKind::FullyConnected: return "fc";
    case ClassifierKind::GradientBoosting: return "gboost";
  }
  return "?";
}

ClassifierKind parse_classifier_kind(std::string_view text) {
  const std::string t = lowered(text);
  static const std::array<ClassifierKind, 6> all = {
      ClassifierKind::LogisticRegression, ClassifierKind::KNN,            ClassifierKind::DecisionTree,
      ClassifierKind::LinearSVM,          ClassifierKind::FullyConnected, ClassifierKind::GradientBoosting};
  for (auto k : all) {
    if (t == classifier_id(k) || t == lowered(classifier_name(k))) return k;
  }
  if (t == "logistic_regression" || t == "lr") return ClassifierKind::LogisticRegression;
  if (t == "decision_tree") return ClassifierKind::DecisionTree;
  if (t == "linear_svm") return ClassifierKind::LinearSVM;
  if (t == "fully_connected" || t == "fullyconnected") return ClassifierKind::FullyConnected;
  if (t == "gradient_boosting" || t == "gb") return ClassifierKind::GradientBoosting;
  throw ConfigError("unknown classifier '" + std::string(text) + "'");
}

const std::vector<ClassifierKind>& implemented_classifiers() {
  static const std::vector<ClassifierKind> kinds = {ClassifierKind::LinearSVM, ClassifierKind::LogisticRegression,
                                                    ClassifierKind::DecisionTree, ClassifierKind::KNN,
                                                    ClassifierKind::FullyConnected};
  return kinds;
}

std::vector<int> Classifier::predict(const Tensor& x) const {
  if (x.rank() != 2) throw ShapeError("predict expects [N, F], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), f = x.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = predict_row(x.data().subspan(i * f, f));
  return out;
}

void Classifier::check_fit_input(const Tensor& x, std::span<const int> y) const {
  if (x.rank() != 2 || x.dim(1) == 0) throw ShapeError("fit expects [N, F], got " + shape_string(x.shape()));
  if (x.dim(0) == 0 || y.empty()) throw std::invalid_argument("fit: empty class set");
  if (x.dim(0) != y.size()) {
    throw ShapeError("fit: " + std::to_string(y.size()) + " labels for " + shape_string(x.shape()));
  }
  for (int label : y) {
    if (label < 0 || label >= static_cast<int>(C)) {
      throw std::invalid_argument("fit: label " + std::to_string(label) + " outside {0,1,2,3}");
    }
  }
}

void Classifier::check_row(std::span<const float> row) const {
  if (!fitted()) throw std::logic_error(std::string(classifier_name(kind())) + " used before fit");
  if (row.size() != width_) {
    throw ShapeError("predict: row width " + std::to_string(row.size()) + ", fitted on " + std::to_string(width_));
  }
}

// ---------------------------------------------------------------- logistic

LogisticRegression::LogisticRegression(const ClassifierParams& params) : params_(params) {}

void LogisticRegression::fit(const Tensor& x_in, std::span<const int> y) {
  check_fit_input(x_in, y);
  const Tensor64 x = to_double(x_in);
  const std::size_t n = x.dim(0), f = x.dim(1);
  weights_ = Tensor64(Shape{C, f});
  bias_ = Tensor64(Shape{C});
  std::vector<double> gw(f);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t e = 0; e < params_.epochs; ++e) {
      std::fill(gw.begin(), gw.end(), 0.0);
      double gb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double z = dot_row(weights_, c, x, i) + bias_[c];
        const double p = 1.0 / (1.0 + std::exp(-z));
        const double r = p - (y[i] == static_cast<int>(c) ? 1.0 : 0.0);
        for (std::size_t j = 0; j < f; ++j) gw[j] += r * x[i * f + j];
        gb += r;
      }
      for (std::size_t j = 0; j < f; ++j) {
        weights_[c * f + j] -= params_.learning_rate * (gw[j] / static_cast<double>(n) + params_.l2 * weights_[c * f + j]);
      }
      bias_[c] -= params_.learning_rate * gb / static_cast<double>(n);
    }
  }
  width_ = f;
}

std::vector<double> LogisticRegression::scores(std::span<const float> row) const {
  check_row(row);
  std::vector<double> s(C);
  for (std::size_t c = 0; c < C; ++c) s[c] = dot_row(weights_, c, row) + bias_[c];
  return s;
}

int LogisticRegression::predict_row(std::span<const float> row) const { return argmax_first(scores(row)); }

void LogisticRegression::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto kv = manifest_for(*this);
  store_params(kv, params_);
  kv.save(dir / "manifest.txt");
  save_tensor(dir / "weights.pft", weights_.cast<float>());
  save_tensor(dir / "bias.pft", bias_.cast<float>());
}

std::unique_ptr<LogisticRegression> LogisticRegression::load(const std::filesystem::path& dir) {
  const auto kv = read_manifest(dir, ClassifierKind::LogisticRegression);
  auto out = std::make_unique<LogisticRegression>(restore_params(kv));
  out->weights_ = load_tensor(dir / "weights.pft").cast<double>();
  out->bias_ = load_tensor(dir / "bias.pft").cast<double>();
  out->width_ = kv.get_uint("input_width");
  if (out->weights_.shape() != Shape{C, out->width_}) throw IoError(dir.string() + ": weight shape mismatch");
  return out;
}

// ---------------------------------------------------------------- svm

LinearSVM::LinearSVM(const ClassifierParams& params) : params_(params) {}

void LinearSVM::fit(const Tensor& x_in, std::span<const int> y) {
  check_fit_input(x_in, y);
  const Tensor64 x = to_double(x_in);
  const std::size_t n = x.dim(0), f = x.dim(1);
  Tensor64 w(Shape{C, f}), b(Shape{C});
  weights_ = Tensor64(Shape{C, f});
  bias_ = Tensor64(Shape{C});
  objective_.assign(params_.epochs, 0.0);
  std::vector<double> gw(f);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t e = 0; e < params_.epochs; ++e) {
      std::fill(gw.begin(), gw.end(), 0.0);
      double gb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double s = y[i] == static_cast<int>(c) ? 1.0 : -1.0;
        if (s * (dot_row(w, c, x, i) + b[c]) < 1.0) {
          for (std::size_t j = 0; j < f; ++j) gw[j] -= s * x[i * f + j];
          gb -= s;
        }
      }
      for (std::size_t j = 0; j < f; ++j) {
        w[c * f + j] -= params_.learning_rate * (gw[j] / static_cast<double>(n) + params_.l2 * w[c * f + j]);
      }
      b[c] -= params_.learning_rate * gb / static_cast<double>(n);
      const double t = static_cast<double>(e + 1);
      for (std::size_t j = 0; j < f; ++j) weights_[c * f + j] += (w[c * f + j] - weights_[c * f + j]) / t;
      bias_[c] += (b[c] - bias_[c]) / t;
      objective_[e] += hinge_objective(weights_, bias_, c, x, y, params_.l2);
    }
  }
  width_ = f;
}

std::vector<double> LinearSVM::scores(std::span<const float> row) const {
  check_row(row);
  std::vector<double> s(C);
  for (std::size_t c = 0; c < C; ++c) s[c] = dot_row(weights_, c, row) + bias_[c];
  return s;
}

int LinearSVM::predict_row(std::span<const float> row) const { return argmax_first(scores(row)); }

void LinearSVM::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto kv = manifest_for(*this);
  store_params(kv, params_);
  kv.save(dir / "manifest.txt");
  save_tensor(dir / "weights.pft", weights_.cast<float>());
  save_tensor(dir / "bias.pft", bias_.cast<float>());
}

std::unique_ptr<LinearSVM> LinearSVM::load(const std::filesystem::path& dir) {
  const auto kv = read_manifest(dir, ClassifierKind::LinearSVM);
  auto out = std::make_unique<LinearSVM>(restore_params(kv));
  out->weights_ = load_tensor(dir / "weights.pft").cast<double>();
  out->bias_ = load_tensor(dir / "bias.pft").cast<double>();
  out->width_ = kv.get_uint("input_width");
  if (out->weights_.shape() != Shape{C, out->width_}) throw IoError(dir.string() + ": weight shape mismatch");
  return out;
}

// ---------------------------------------------------------------- knn

KNearestNeighbors::KNearestNeighbors(const ClassifierParams& params) : k_(params.k) {}

void KNearestNeighbors::fit(const Tensor& x, std::span<const int> y) {
  check_fit_input(x, y);
  if (k_ < 1 || k_ > x.dim(0)) {
    throw std::invalid_argument("knn: k=" + std::to_string(k_) + " must lie in [1, " + std::to_string(x.dim(0)) + "]");
  }
  points_ = x;
  labels_.assign(y.begin(), y.end());
  width_ = x.dim(1);
}

int KNearestNeighbors::predict_row(std::span<const float> row) const {
  check_row(row);
  const std::size_t n = labels_.size(), f = width_;
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      const double diff = static_cast<double>(points_[i * f + j]) - static_cast<double>(row[j]);
      d += diff * diff;
    }
    dist[i] = {d, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
  std::array<double, C> votes{};
  for (std::size_t i = 0; i < k_; ++i) votes[static_cast<std::size_t>(labels_[dist[i].second])] += 1.0;
  return argmax_first(votes);
}

void KNearestNeighbors::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto kv = manifest_for(*this);
  kv.set("k", static_cast<std::uint64_t>(k_));
  kv.save(dir / "manifest.txt");
  save_tensor(dir / "points.pft", points_);
  Tensor labels(Shape{labels_.size()});
  for (std::size_t i = 0; i < labels_.size(); ++i) labels[i] = static_cast<float>(labels_[i]);
  save_tensor(dir / "labels.pft", labels);
}

std::unique_ptr<KNearestNeighbors> KNearestNeighbors::load(const std::filesystem::path& dir) {
  const auto kv = read_manifest(dir, ClassifierKind::KNN);
  ClassifierParams p;
  p.k = kv.get_uint("k");
  auto out = std::make_unique<KNearestNeighbors>(p);
  const Tensor points = load_tensor(dir / "points.pft");
  const Tensor labels = load_tensor(dir / "labels.pft");
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(labels[i]);
  out->fit(points, y);
  return out;
}

// ---------------------------------------------------------------- tree

DecisionTree::DecisionTree(const ClassifierParams& params) : params_(params) {}

void DecisionTree::fit(const Tensor& x, std::span<const int> y) {
  check_fit_input(x, y);
  if (params_.min_leaf < 1) throw ConfigError("decision tree: min_leaf must be at least 1");
  nodes_.clear();
  std::vector<std::size_t> rows(y.size());
  std::iota(rows.begin(), rows.end(), 0);
  grow(x, y, rows, 0);
  width_ = x.dim(1);
}

int DecisionTree::grow(const Tensor& x, std::span<const int> y, std::vector<std::size_t>& rows, std::size_t depth) {
  const std::size_t n = rows.size(), f = x.dim(1);
  std::array<std::size_t, C> counts{};
  for (auto r : rows) ++counts[static_cast<std::size_t>(y[r])];
  Node node;
  node.samples = n;
  node.leaf_class = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(node);

  const bool pure = counts[static_cast<std::size_t>(node.leaf_class)] == n;
  if (pure || depth >= params_.max_depth || n < 2 * params_.min_leaf) return index;

  // Weighted Gini times n, i.e. n_l - sum(l^2)/n_l + n_r - sum(r^2)/n_r.
  double best_score = INFINITY;
  int best_feature = -1;
  double best_threshold = 0.0;
  std::vector<std::size_t> order(rows);
  for (std::size_t j = 0; j < f; ++j) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a * f + j] < x[b * f + j]; });
    std::array<double, C> left{};
    for (std::size_t i = 1; i < n; ++i) {
      left[static_cast<std::size_t>(y[order[i - 1]])] += 1.0;
      const float lo = x[order[i - 1] * f + j], hi = x[order[i] * f + j];
      if (!(lo < hi) || i < params_.min_leaf || n - i < params_.min_leaf) continue;
      const double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
      double sl = 0.0, sr = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double r = static_cast<double>(counts[c]) - left[c];
        sl += left[c] * left[c];
        sr += r * r;
      }
      const double score = (nl - sl / nl) + (nr - sr / nr);
      if (score < best_score - 1e-9) {
        best_score = score;
        best_feature = static_cast<int>(j);
        best_threshold = (static_cast<double>(lo) + static_cast<double>(hi)) / 2.0;
      }
    }
  }
  if (best_feature < 0) return index;

  std::vector<std::size_t> left_rows, right_rows;
  for (auto r : rows) {
    (static_cast<double>(x[r * f + static_cast<std::size_t>(best_feature)]) <= best_threshold ? left_rows : right_rows)
        .push_back(r);
  }
  nodes_[static_cast<std::size_t>(index)].feature = best_feature;
  nodes_[static_cast<std::size_t>(index)].threshold = best_threshold;
  const int l = grow(x, y, left_rows, depth + 1);
  nodes_[static_cast<std::size_t>(index)].left = l;
  const int r = grow(x, y, right_rows, depth + 1);
  nodes_[static_cast<std::size_t>(index)].right = r;
  return index;
}

int DecisionTree::predict_row(std::span<const float> row) const {
  check_row(row);
  std::size_t at = 0;
  while (nodes_[at].feature >= 0) {
    const auto& nd = nodes_[at];
    at = static_cast<std::size_t>(static_cast<double>(row[static_cast<std::size_t>(nd.feature)]) <= nd.threshold
                                      ? nd.left
                                      : nd.right);
  }
  return nodes_[at].leaf_class;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

void DecisionTree::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto kv = manifest_for(*this);
  store_params(kv, params_);
  kv.set("nodes", static_cast<std::uint64_t>(nodes_.size()));
  kv.save(dir / "manifest.txt");
  std::ofstream out(dir / "tree.txt", std::ios::binary);
  out << "# node feature threshold left right leaf_class samples\n";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& nd = nodes_[i];
    out << i << ' ' << nd.feature << ' ' << format_double(nd.threshold) << ' ' << nd.left << ' ' << nd.right << ' '
        << nd.leaf_class << ' ' << nd.samples << '\n';
  }
  if (!out) throw IoError("cannot write " + (dir / "tree.txt").string());
}

std::unique_ptr<DecisionTree> DecisionTree::load(const std::filesystem::path& dir) {
  const auto kv = read_manifest(dir, ClassifierKind::DecisionTree);
  auto out = std::make_unique<DecisionTree>(restore_params(kv));
  std::ifstream in(dir / "tree.txt", std::ios::binary);
  if (!in) throw IoError("cannot open " + (dir / "tree.txt").string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::size_t id = 0;
    std::string threshold;
    Node nd;
    if (!(ls >> id >> nd.feature >> threshold >> nd.left >> nd.right >> nd.leaf_class >> nd.samples) ||
        id != out->nodes_.size()) {
      throw IoError((dir / "tree.txt").string() + ": malformed line '" + line + "'");
    }
    nd.threshold = parse_double(threshold);
    out->nodes_.push_back(nd);
  }
  const std::size_t count = out->nodes_.size();
  if (count == 0 || count != kv.get_uint("nodes")) throw IoError((dir / "tree.txt").string() + ": node count mismatch");
  for (const auto& nd : out->nodes_) {
    if (nd.feature >= 0 && (nd.left <= 0 || nd.right <= 0 || static_cast<std::size_t>(nd.left) >= count ||
                            static_cast<std::size_t>(nd.right) >= count)) {
      throw IoError((dir / "tree.txt").string() + ": child index out of range");
    }
  }
  out->width_ = kv.get_uint("input_width");
  return out;
}

// ---------------------------------------------------------------- fully connected

FullyConnectedClassifier::FullyConnectedClassifier(const ClassifierParams& params) : params_(params) {}

void FullyConnectedClassifier::fit(const Tensor& x, std::span<const int> y) {
  check_fit_input(x, y);
  TrainingData data{x, std::nullopt, std::vector<int>(y.begin(), y.end())};
  auto trained = train(build_model_1<float>(x.dim(1), params_.head_arch, params_.head.seed), data, params_.head);
  model_.emplace(std::move(trained.model));
  width_ = x.dim(1);
}

int FullyConnectedClassifier::predict_row(std::span<const float> row) const {
  check_row(row);
  const Tensor input(Shape{1, width_}, std::vector<float>(row.begin(), row.end()));
  const Tensor probs = model_->infer(input).probs;
  std::size_t best = 0;
  for (std::size_t c = 1; c < C; ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  return static_cast<int>(best);
}

void FullyConnectedClassifier::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto kv = manifest_for(*this);
  kv.save(dir / "manifest.txt");
  save_checkpoint(dir / "model", TrainedModel{*model_, params_.head, {}});
}

std::unique_ptr<FullyConnectedClassifier> FullyConnectedClassifier::load(const std::filesystem::path& dir) {
  const auto kv = read_manifest(dir, ClassifierKind::FullyConnected);
  auto trained = load_checkpoint(dir / "model");
  ClassifierParams p;
  p.head = trained.config;
  p.head_arch = trained.model.spec().arch;
  auto out = std::make_unique<FullyConnectedClassifier>(p);
  out->width_ = kv.get_uint("input_width");
  if (trained.model.spec().tabular_width != out->width_) throw IoError(dir.string() + ": input width mismatch");
  out->model_.emplace(std::move(trained.model));
  return out;
}

// ---------------------------------------------------------------- factory

std::unique_ptr<Classifier> make_classifier(ClassifierKind kind, const ClassifierParams& params) {
  switch (kind) {
    case ClassifierKind::LogisticRegression: return std::make_unique<LogisticRegression>(params);
    case ClassifierKind::KNN: return std::make_unique<KNearestNeighbors>(params);
    case ClassifierKind::DecisionTree: return std::make_unique<DecisionTree>(params);
    case ClassifierKind::LinearSVM: return std::make_unique<LinearSVM>(params);
    case ClassifierKind::FullyConnected: return std::make_unique<FullyConnectedClassifier>(params);
    case ClassifierKind::GradientBoosting: break;
  }
  throw NotImplementedError("classifier '" + std::string(classifier_name(kind)) + "' is not implemented");
}

std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& dir) {
  const auto kv = KeyValueFile::load(dir / "manifest.txt");
  switch (parse_classifier_kind(kv.get("kind"))) {
    case ClassifierKind::LogisticRegression: return LogisticRegression::load(dir);
    case ClassifierKind::KNN: return KNearestNeighbors::load(dir);
    case ClassifierKind::DecisionTree: return DecisionTree::load(dir);
    case ClassifierKind::LinearSVM: return LinearSVM::load(dir);
    case ClassifierKind::FullyConnected: return FullyConnectedClassifier::load(dir);
    case ClassifierKind::GradientBoosting: break;
  }
  throw NotImplementedError("gradient boosting classifiers cannot be loaded");
}

// ---------------------------------------------------------------- standardizer

Standardizer Standardizer::fit(const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) == 0) throw ShapeError("standardizer expects non-empty [N, F]");
  const std::size_t n = x.dim(0), f = x.dim(1);
  Standardizer s;
  s.mean.assign(f, 0.0);
  s.scale.assign(f, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) s.mean[j] += x[i * f + j];
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(f, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) {
      const double d = x[i * f + j] - s.mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < f; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Tensor Standardizer::transform(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != mean.size()) {
    throw ShapeError("standardizer fitted on width " + std::to_string(mean.size()) + ", got " + shape_string(x.shape()));
  }
  Tensor out(x.shape());
  const std::size_t n = x.dim(0), f = x.dim(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j)
      out[i * f + j] = static_cast<float>((x[i * f + j] - mean[j]) / scale[j]);
  return out;
}

}  // namespace pricefusion

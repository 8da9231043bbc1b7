#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "oracles.hpp"
#include "pricefusion/metrics.hpp"
#include "schema_check.hpp"

using namespace pricefusion;
namespace pf_testing = pricefusion::testing;

namespace {

struct Tally {
  double precision[4]{}, recall[4]{}, f1[4]{};
  int support[4]{};
  double macro_p = 0, macro_r = 0, macro_f = 0, weighted_p = 0, weighted_r = 0, weighted_f = 0, accuracy = 0;
};

// Counts straight from the label lists, without building a matrix.
Tally tally(const std::vector<int>& y, const std::vector<int>& p) {
  Tally t;
  int present = 0, correct = 0;
  const double n = static_cast<double>(y.size());
  for (int c = 0; c < 4; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c && p[i] == c) ++tp;
      if (y[i] != c && p[i] == c) ++fp;
      if (y[i] == c && p[i] != c) ++fn;
    }
    t.support[c] = tp + fn;
    t.precision[c] = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    t.recall[c] = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double s = t.precision[c] + t.recall[c];
    t.f1[c] = s > 0 ? 2 * t.precision[c] * t.recall[c] / s : 0.0;
    t.weighted_p += t.support[c] / n * t.precision[c];
    t.weighted_r += t.support[c] / n * t.recall[c];
    t.weighted_f += t.support[c] / n * t.f1[c];
    if (t.support[c] > 0) {
      ++present;
      t.macro_p += t.precision[c];
      t.macro_r += t.recall[c];
      t.macro_f += t.f1[c];
    }
  }
  for (std::size_t i = 0; i < y.size(); ++i) correct += y[i] == p[i];
  t.macro_p /= present;
  t.macro_r /= present;
  t.macro_f /= present;
  t.accuracy = correct / n;
  return t;
}

std::vector<int> random_labels(std::size_t n, Rng& rng, int classes = 4) {
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
  return v;
}

double dist(const Tensor& a, std::size_t i, std::size_t j) {
  const std::size_t d = a.dim(1);
  double s = 0;
  for (std::size_t k = 0; k < d; ++k) s += (double(a[i * d + k]) - a[j * d + k]) * (double(a[i * d + k]) - a[j * d + k]);
  return std::sqrt(s);
}

ReportDocument sample_document() {
  Rng rng(70);
  const auto y = random_labels(60, rng), p = random_labels(60, rng);
  ReportDocument doc;
  doc.title = "Classifier comparison";
  doc.protocol = "stratified 80/20 train/test hold-out split, seed 0";
  doc.config = {{"model", "3"}, {"seed", "0"}};
  doc.rows.push_back({"SVM", compute_metrics(ConfusionMatrix::from_predictions(y, p)), "ok"});
  doc.rows.push_back({"Gradient Boosting", std::nullopt, "not implemented"});
  return doc;
}

}  // namespace

TEST(Metrics, MatchesTallyOracleOnRandom200) {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    const auto y = random_labels(200, rng, trial % 5 == 0 ? 3 : 4);
    auto p = random_labels(200, rng);
    for (std::size_t i = 0; i < 200; ++i)
      if (rng.uniform() < 0.5) p[i] = y[i];
    const auto r = compute_metrics(ConfusionMatrix::from_predictions(y, p));
    const auto t = tally(y, p);
    EXPECT_EQ(r.total, 200u);
    for (int c = 0; c < 4; ++c) {
      EXPECT_EQ(r.per_class[c].support, static_cast<std::uint64_t>(t.support[c]));
      EXPECT_DOUBLE_EQ(r.per_class[c].precision, t.precision[c]);
      EXPECT_DOUBLE_EQ(r.per_class[c].recall, t.recall[c]);
      EXPECT_DOUBLE_EQ(r.per_class[c].f1, t.f1[c]);
    }
    EXPECT_DOUBLE_EQ(r.macro_precision, t.macro_p);
    EXPECT_DOUBLE_EQ(r.macro_recall, t.macro_r);
    EXPECT_DOUBLE_EQ(r.macro_f1, t.macro_f);
    EXPECT_DOUBLE_EQ(r.weighted_precision, t.weighted_p);
    EXPECT_DOUBLE_EQ(r.weighted_recall, t.weighted_r);
    EXPECT_DOUBLE_EQ(r.weighted_f1, t.weighted_f);
    EXPECT_EQ(r.accuracy, t.accuracy);
    for (double v : {r.macro_precision, r.macro_recall, r.macro_f1, r.accuracy}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Metrics, DiagonalIsPerfect) {
  ConfusionMatrix cm;
  for (int c = 0; c < 4; ++c) cm.counts[c][c] = 5 + c;
  const auto r = compute_metrics(cm);
  EXPECT_EQ(r.macro_precision, 1.0);
  EXPECT_EQ(r.macro_recall, 1.0);
  EXPECT_EQ(r.macro_f1, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.zero_division, 0u);
}

TEST(Metrics, ZeroDenominatorsAreGuarded) {
  // Class 1 is never predicted: precision 0/0, F1 falls to 0.
  ConfusionMatrix cm;
  cm.counts[0][0] = 3;
  cm.counts[1][0] = 2;
  const auto r = compute_metrics(cm);
  EXPECT_EQ(r.per_class[1].precision, 0.0);
  EXPECT_EQ(r.per_class[1].recall, 0.0);
  EXPECT_EQ(r.per_class[1].f1, 0.0);
  EXPECT_GT(r.zero_division, 0u);
  // Only classes 0 and 1 have support.
  EXPECT_DOUBLE_EQ(r.macro_recall, 0.5);
  EXPECT_THROW(compute_metrics(ConfusionMatrix{}), std::invalid_argument);
}

TEST(Metrics, PrecisionOneRecallZeroGivesZeroF1) {
  ConfusionMatrix cm;
  cm.counts[2][0] = 4;  // class 2 never found
  cm.counts[0][0] = 1;
  const auto r = compute_metrics(cm);
  EXPECT_EQ(r.per_class[2].recall, 0.0);
  EXPECT_EQ(r.per_class[2].f1, 0.0);
}

TEST(Metrics, AccuracyIsTraceOverTotal) {
  Rng rng(72);
  const auto y = random_labels(97, rng), p = random_labels(97, rng);
  const auto cm = ConfusionMatrix::from_predictions(y, p);
  EXPECT_EQ(cm.total(), 97u);
  EXPECT_EQ(compute_metrics(cm).accuracy, static_cast<double>(cm.trace()) / 97.0);
}

TEST(Metrics, ClassPermutationPermutesPerClass) {
  Rng rng(73);
  const int perm[4] = {2, 0, 3, 1};
  for (int trial = 0; trial < 20; ++trial) {
    const auto y = random_labels(150, rng), p = random_labels(150, rng);
    std::vector<int> yp(150), pp(150);
    for (std::size_t i = 0; i < 150; ++i) {
      yp[i] = perm[y[i]];
      pp[i] = perm[p[i]];
    }
    const auto a = compute_metrics(ConfusionMatrix::from_predictions(y, p));
    const auto b = compute_metrics(ConfusionMatrix::from_predictions(yp, pp));
    EXPECT_EQ(a.accuracy, b.accuracy);
    for (int c = 0; c < 4; ++c) {
      EXPECT_EQ(a.per_class[c].precision, b.per_class[perm[c]].precision);
      EXPECT_EQ(a.per_class[c].recall, b.per_class[perm[c]].recall);
    }
    EXPECT_NEAR(a.macro_f1, b.macro_f1, 1e-12);
  }
}

TEST(Metrics, RejectsBadInput) {
  EXPECT_THROW(ConfusionMatrix::from_predictions(std::vector<int>{0, 1}, std::vector<int>{0}), std::invalid_argument);
  ConfusionMatrix cm;
  EXPECT_THROW(cm.add(4, 0), std::invalid_argument);
}

TEST(Report, JsonConformsToSchema) {
  std::ifstream in(PRICEFUSION_SCHEMA_PATH);
  ASSERT_TRUE(in) << PRICEFUSION_SCHEMA_PATH;
  const pf_testing::SchemaCheck schema(nlohmann::json::parse(in));
  const auto doc = nlohmann::json::parse(report_json(sample_document()));
  const auto errors = schema.validate(doc);
  EXPECT_TRUE(errors.empty()) << (errors.empty() ? "" : errors.front());
  EXPECT_EQ(doc["rows"][1]["status"], "not implemented");
  EXPECT_EQ(doc["rows"][0]["per_class"].size(), 4u);

  auto broken = doc;
  broken["rows"][0]["accuracy"] = 1.5;
  broken["rows"][0].erase("confusion");
  EXPECT_EQ(schema.validate(broken).size(), 2u);
}

TEST(Report, TextHasOneLinePerClassifier) {
  const std::string text = report_text(sample_document());
  EXPECT_NE(text.find("# protocol: stratified 80/20"), std::string::npos);
  EXPECT_NE(text.find("macro"), std::string::npos);
  EXPECT_NE(text.find("Gradient Boosting  not implemented"), std::string::npos);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  EXPECT_EQ(lines, 3u + 2u + 1u + 2u);
}

TEST(Pca, MatchesFullEigendecomposition) {
  Rng rng(74);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t f = 2 + rng.uniform_index(5), n = 30 + rng.uniform_index(40);
    Tensor x({n, f});
    // Anisotropic scales keep the top eigenvalues well separated.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) x[i * f + j] = static_cast<float>(rng.normal() * (1.0 + 2.0 * double(f - j)));
    Eigen::MatrixXd m(n, f);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) m(i, j) = x[i * f + j];
    const Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
    const Eigen::MatrixXd cov = c.transpose() * c / double(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const auto r = pca_project(x, 2, 5);
    for (std::size_t k = 0; k < 2; ++k) {
      const double want = es.eigenvalues()(static_cast<Eigen::Index>(f - 1 - k));
      EXPECT_NEAR(r.eigenvalues[k], want, 1e-6 * want) << "trial " << trial;
      Eigen::VectorXd u = es.eigenvectors().col(static_cast<Eigen::Index>(f - 1 - k));
      double dot = 0;
      for (std::size_t j = 0; j < f; ++j) dot += u(static_cast<Eigen::Index>(j)) * r.components[j * 2 + k];
      EXPECT_NEAR(std::abs(dot), 1.0, 1e-5);
      EXPECT_TRUE(r.converged[k]);
    }
  }
}

TEST(Pca, ComponentsOrthonormalAndSignFixed) {
  Rng rng(75);
  const Tensor x = pf_testing::random_tensor<float>({80, 6}, rng, -3, 3);
  const auto r = pca_project(x, 2);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      double g = 0;
      for (std::size_t j = 0; j < 6; ++j) g += r.components[j * 2 + a] * r.components[j * 2 + b];
      EXPECT_NEAR(g, a == b ? 1.0 : 0.0, 1e-5);
    }
  for (std::size_t k = 0; k < 2; ++k) {
    std::size_t big = 0;
    for (std::size_t j = 1; j < 6; ++j)
      if (std::abs(r.components[j * 2 + k]) > std::abs(r.components[big * 2 + k])) big = j;
    EXPECT_GT(r.components[big * 2 + k], 0.0);
  }
}

TEST(Pca, CollinearDataIsOneComponent) {
  Rng rng(76);
  const double dir[5] = {1, -2, 0.5, 3, 1};
  Tensor x({50, 5});
  for (std::size_t i = 0; i < 50; ++i) {
    const double t = rng.normal();
    for (std::size_t j = 0; j < 5; ++j) x[i * 5 + j] = static_cast<float>(2.0 + t * dir[j]);
  }
  EXPECT_GE(pca_project(x).explained_ratio[0], 0.999);
}

TEST(Pca, TwoDimensionalInputIsRotation) {
  Rng rng(77);
  const Tensor x = pf_testing::random_tensor<float>({40, 2}, rng, -5, 5);
  const auto r = pca_project(x);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = i + 1; j < 40; ++j) EXPECT_NEAR(dist(r.projection, i, j), dist(x, i, j), 1e-4);
}

TEST(Pca, IsotropicSampleHasComparableEigenvalues) {
  Rng rng(78);
  Tensor x({2000, 2});
  for (auto& v : x.data()) v = static_cast<float>(rng.normal());
  const auto r = pca_project(x);
  EXPECT_GT(r.eigenvalues[1] / r.eigenvalues[0], 0.85);
}

TEST(Pca, ZeroVarianceGivesZeros) {
  const Tensor x({10, 3}, 4.0f);
  const auto r = pca_project(x);
  EXPECT_EQ(r.explained_ratio, (std::vector<double>{0.0, 0.0}));
  for (float v : r.projection.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(pca_project(Tensor({2, 3})), std::invalid_argument);
}

TEST(Pca, SeedDeterministic) {
  Rng rng(79);
  const Tensor x = pf_testing::random_tensor<float>({30, 4}, rng);
  EXPECT_EQ(pca_project(x, 2, 3).projection, pca_project(x, 2, 3).projection);
}

TEST(Silhouette, SeparatedBlobsArePositiveMixedNearZero) {
  Rng rng(80);
  Tensor blobs({200, 2});
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < 200; ++i) {
    labels[i] = static_cast<int>(i % 4);
    blobs[i * 2] = static_cast<float>(rng.normal(labels[i] % 2 ? 6 : -6, 1));
    blobs[i * 2 + 1] = static_cast<float>(rng.normal(labels[i] / 2 ? 6 : -6, 1));
  }
  EXPECT_GT(mean_silhouette(blobs, labels), 0.7);
  std::vector<int> shuffled = labels;
  rng.shuffle(std::span<int>(shuffled));
  EXPECT_LT(std::abs(mean_silhouette(blobs, shuffled)), 0.1);
}

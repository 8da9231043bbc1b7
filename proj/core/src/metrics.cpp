#include "pricefusion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "pricefusion/rng.hpp"

namespace pricefusion {
namespace {

double ratio(std::uint64_t num, std::uint64_t den, std::uint64_t& zero_division) {
  if (den == 0) {
    ++zero_division;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("confusion matrix: " + std::to_string(truth.size()) + " labels vs " +
                                std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

void ConfusionMatrix::add(int truth, int predicted) {
  const int n = static_cast<int>(kNumClasses);
  if (truth < 0 || truth >= n || predicted < 0 || predicted >= n) {
    throw std::invalid_argument("confusion matrix: class outside {0,1,2,3}");
  }
  ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (auto v : row) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) t += counts[i][i];
  return t;
}

std::uint64_t ConfusionMatrix::support(std::size_t cls) const noexcept {
  std::uint64_t t = 0;
  for (auto v : counts[cls]) t += v;
  return t;
}

EvalReport compute_metrics(const ConfusionMatrix& cm) {
  EvalReport r;
  r.confusion = cm;
  r.total = cm.total();
  if (r.total == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  std::size_t present = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& m = r.per_class[c];
    m.tp = cm.counts[c][c];
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      if (k == c) continue;
      m.fp += cm.counts[k][c];
      m.fn += cm.counts[c][k];
    }
    m.support = m.tp + m.fn;
    m.tn = r.total - m.tp - m.fp - m.fn;
    m.precision = ratio(m.tp, m.tp + m.fp, r.zero_division);
    m.recall = ratio(m.tp, m.tp + m.fn, r.zero_division);
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
      ++r.zero_division;
    }
    const double w = static_cast<double>(m.support) / static_cast<double>(r.total);
    r.weighted_precision += w * m.precision;
    r.weighted_recall += w * m.recall;
    r.weighted_f1 += w * m.f1;
    if (m.support > 0) {
      ++present;
      r.macro_precision += m.precision;
      r.macro_recall += m.recall;
      r.macro_f1 += m.f1;
    }
  }
  r.macro_precision /= static_cast<double>(present);
  r.macro_recall /= static_cast<double>(present);
  r.macro_f1 /= static_cast<double>(present);
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(r.total);
  return r;
}

std::string report_json(const ReportDocument& doc) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["format"] = "pricefusion-report/1";
  j["title"] = doc.title;
  j["averaging"] = kAveragingNote;
  j["protocol"] = doc.protocol;
  ordered_json config = ordered_json::object();
  for (const auto& [k, v] : doc.config) config[k] = v;
  j["config"] = config;
  ordered_json rows = ordered_json::array();
  for (const auto& row : doc.rows) {
    ordered_json o;
    o["classifier"] = row.classifier;
    o["status"] = row.status;
    if (row.report) {
      const auto& r = *row.report;
      o["accuracy"] = r.accuracy;
      o["precision_macro"] = r.macro_precision;
      o["recall_macro"] = r.macro_recall;
      o["f1_macro"] = r.macro_f1;
      o["precision_weighted"] = r.weighted_precision;
      o["recall_weighted"] = r.weighted_recall;
      o["f1_weighted"] = r.weighted_f1;
      o["samples"] = r.total;
      o["zero_division_warnings"] = r.zero_division;
      ordered_json per = ordered_json::array();
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto& m = r.per_class[c];
        per.push_back(ordered_json{{"class", c},          {"support", m.support}, {"precision", m.precision},
                                   {"recall", m.recall},  {"f1", m.f1},           {"tp", m.tp},
                                   {"fp", m.fp},          {"fn", m.fn},           {"tn", m.tn}});
      }
      o["per_class"] = per;
      ordered_json cm = ordered_json::array();
      for (const auto& line : r.confusion.counts) cm.push_back(ordered_json(line));
      o["confusion"] = cm;
    }
    rows.push_back(o);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::string report_text(const ReportDocument& doc) {
  std::ostringstream out;
  out << "# " << doc.title << "\n";
  out << "# averaging: " << kAveragingNote << "\n";
  out << "# protocol: " << doc.protocol << "\n";
  for (const auto& [k, v] : doc.config) out << "# " << k << " = " << v << "\n";
  std::size_t name_width = 10;
  for (const auto& row : doc.rows) name_width = std::max(name_width, row.classifier.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  out << pad("classifier", name_width) << "  precision     recall         f1   accuracy\n";
  for (const auto& row : doc.rows) {
    out << pad(row.classifier, name_width);
    if (row.report) {
      const auto& r = *row.report;
      for (double v : {r.macro_precision, r.macro_recall, r.macro_f1, r.accuracy}) {
        const std::string cell = fixed(v);
        out << std::string(11 - cell.size(), ' ') << cell;
      }
    } else {
      out << "  " << row.status;
    }
    out << "\n";
  }
  return out.str();
}

PcaResult pca_project(const Tensor& x, std::size_t dims, std::uint64_t seed) {
  if (x.rank() != 2) throw ShapeError("pca expects [N, F], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), f = x.dim(1);
  if (n < 3 || f < 2) throw std::invalid_argument("pca needs N >= 3 and F >= 2, got " + shape_string(x.shape()));
  if (dims == 0 || dims > f) throw std::invalid_argument("pca: dims must lie in [1, F]");
  constexpr double kTol = 1e-9;
  constexpr std::size_t kMaxIter = 10000;

  std::vector<double> mean(f, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) mean[j] += x[i * f + j];
  for (auto& m : mean) m /= static_cast<double>(n);
  std::vector<double> centered(n * f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) centered[i * f + j] = x[i * f + j] - mean[j];
  std::vector<double> cov(f * f, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &centered[i * f];
    for (std::size_t a = 0; a < f; ++a) {
      if (row[a] == 0.0) continue;
      for (std::size_t b = a; b < f; ++b) cov[a * f + b] += row[a] * row[b];
    }
  }
  for (std::size_t a = 0; a < f; ++a)
    for (std::size_t b = a; b < f; ++b) {
      cov[a * f + b] /= static_cast<double>(n - 1);
      cov[b * f + a] = cov[a * f + b];
    }
  double total_variance = 0.0;
  for (std::size_t a = 0; a < f; ++a) total_variance += cov[a * f + a];

  PcaResult out;
  out.components = Tensor64(Shape{f, dims});
  out.projection = Tensor(Shape{n, dims});
  std::vector<std::vector<double>> found;
  Rng rng(seed);
  auto orthogonalize = [&](std::vector<double>& v) {
    for (const auto& u : found) {
      double d = 0.0;
      for (std::size_t j = 0; j < f; ++j) d += u[j] * v[j];
      for (std::size_t j = 0; j < f; ++j) v[j] -= d * u[j];
    }
  };
  auto normalize = [&](std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    s = std::sqrt(s);
    if (s > 0.0)
      for (double& e : v) e /= s;
    return s;
  };
  // Deflated covariance: cov - sum lambda_i u_i u_i^T.
  std::vector<double> deflated = cov;
  for (std::size_t k = 0; k < dims; ++k) {
    std::vector<double> v(f);
    do {
      for (auto& e : v) e = rng.normal();
      orthogonalize(v);
    } while (normalize(v) < 1e-12);
    std::vector<double> w(f);
    double lambda = 0.0;
    std::size_t iter = 0;
    bool converged = false;
    while (iter < kMaxIter) {
      ++iter;
      for (std::size_t a = 0; a < f; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < f; ++b) s += deflated[a * f + b] * v[b];
        w[a] = s;
      }
      orthogonalize(w);
      const double norm = normalize(w);
      if (norm < 1e-300) {
        // Remaining variance is zero; keep the orthogonal start vector.
        lambda = 0.0;
        converged = true;
        break;
      }
      double delta = 0.0;
      for (std::size_t j = 0; j < f; ++j) delta += (w[j] - v[j]) * (w[j] - v[j]);
      v.swap(w);
      lambda = norm;
      if (std::sqrt(delta) < kTol) {
        converged = true;
        break;
      }
    }
    std::size_t big = 0;
    for (std::size_t j = 1; j < f; ++j) {
      if (std::abs(v[j]) > std::abs(v[big])) big = j;
    }
    if (v[big] < 0.0)
      for (auto& e : v) e = -e;
    // Rayleigh quotient on the undeflated covariance.
    double rq = 0.0;
    for (std::size_t a = 0; a < f; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < f; ++b) s += cov[a * f + b] * v[b];
      rq += v[a] * s;
    }
    lambda = std::max(rq, 0.0);
    if (total_variance <= 1e-300) lambda = 0.0;
    for (std::size_t a = 0; a < f; ++a)
      for (std::size_t b = 0; b < f; ++b) deflated[a * f + b] -= lambda * v[a] * v[b];
    found.push_back(v);
    for (std::size_t j = 0; j < f; ++j) out.components[j * dims + k] = v[j];
    out.eigenvalues.push_back(lambda);
    out.explained_ratio.push_back(total_variance > 1e-300 ? lambda / total_variance : 0.0);
    out.iterations.push_back(iter);
    out.converged.push_back(converged);
  }
  if (total_variance > 1e-300) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < dims; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < f; ++j) s += centered[i * f + j] * out.components[j * dims + k];
        out.projection[i * dims + k] = static_cast<float>(s);
      }
  }
  return out;
}

double mean_silhouette(const Tensor& points, std::span<const int> labels) {
  if (points.rank() != 2 || points.dim(0) != labels.size()) {
    throw ShapeError("silhouette: points " + shape_string(points.shape()) + " vs " + std::to_string(labels.size()) +
                     " labels");
  }
  const std::size_t n = points.dim(0), d = points.dim(1);
  if (n == 0) return 0.0;
  int max_label = 0;
  for (int l : labels) max_label = std::max(max_label, l);
  const std::size_t k = static_cast<std::size_t>(max_label) + 1;
  std::vector<std::size_t> size(k, 0);
  for (int l : labels) ++size[static_cast<std::size_t>(l)];
  double total = 0.0;
  std::vector<double> sum(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t e = 0; e < d; ++e) {
        const double diff = static_cast<double>(points[i * d + e]) - static_cast<double>(points[j * d + e]);
        s += diff * diff;
      }
      sum[static_cast<std::size_t>(labels[j])] += std::sqrt(s);
    }
    const auto own = static_cast<std::size_t>(labels[i]);
    if (size[own] < 2) continue;
    const double a = sum[own] / static_cast<double>(size[own] - 1);
    double b = INFINITY;
    for (std::size_t c = 0; c < k; ++c) {
      if (c != own && size[c] > 0) b = std::min(b, sum[c] / static_cast<double>(size[c]));
    }
    if (!std::isfinite(b)) continue;
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

}  // namespace pricefusion

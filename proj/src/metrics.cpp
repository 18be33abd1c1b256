#include "isvae/metrics.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>
#include <vector>

namespace isvae::metrics {

namespace {

// Remap arbitrary label values to 0..C-1 in first-appearance order.
std::vector<int> compact(const VecI& labels, int* count) {
  std::unordered_map<int, int> ids;
  std::vector<int> out(labels.size());
  for (int i = 0; i < labels.size(); ++i)
    out[i] = ids.emplace(labels[i], static_cast<int>(ids.size())).first->second;
  *count = static_cast<int>(ids.size());
  return out;
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return h;
}

}  // namespace

HCV homogeneity_completeness_v(const VecI& true_labels, const VecI& pred_labels) {
  if (true_labels.size() != pred_labels.size())
    throw ValidationError("homogeneity_completeness_v: label length mismatch");
  if (true_labels.size() < 1) throw ValidationError("homogeneity_completeness_v: empty labels");

  int n_classes = 0, n_clusters = 0;
  std::vector<int> truth = compact(true_labels, &n_classes);
  std::vector<int> pred = compact(pred_labels, &n_clusters);
  const double n = static_cast<double>(truth.size());

  Mat joint = Mat::Zero(n_classes, n_clusters);
  for (size_t i = 0; i < truth.size(); ++i) joint(truth[i], pred[i]) += 1.0;

  std::vector<double> class_counts(n_classes, 0.0), cluster_counts(n_clusters, 0.0);
  for (int c = 0; c < n_classes; ++c)
    for (int k = 0; k < n_clusters; ++k) {
      class_counts[c] += joint(c, k);
      cluster_counts[k] += joint(c, k);
    }

  const double h_class = entropy(class_counts, n);
  const double h_cluster = entropy(cluster_counts, n);

  // H(C|K) = -sum p(c,k) log( p(c,k) / p(k) )
  double h_class_given_cluster = 0.0, h_cluster_given_class = 0.0;
  for (int c = 0; c < n_classes; ++c)
    for (int k = 0; k < n_clusters; ++k) {
      const double p = joint(c, k);
      if (p <= 0) continue;
      h_class_given_cluster -= (p / n) * std::log(p / cluster_counts[k]);
      h_cluster_given_class -= (p / n) * std::log(p / class_counts[c]);
    }

  HCV r;
  r.h = h_class > 0 ? 1.0 - h_class_given_cluster / h_class : 1.0;
  r.c = h_cluster > 0 ? 1.0 - h_cluster_given_class / h_cluster : 1.0;
  r.v = (r.h + r.c) > 0 ? 2.0 * r.h * r.c / (r.h + r.c) : 0.0;
  return r;
}

double silhouette(const Mat& features, const VecI& labels) {
  const int n = static_cast<int>(features.rows());
  if (labels.size() != n) throw ValidationError("silhouette: label length mismatch");
  int n_clusters = 0;
  std::vector<int> lab = compact(labels, &n_clusters);
  if (n_clusters < 2) throw ValidationError("silhouette: need at least two clusters");

  std::vector<int> sizes(n_clusters, 0);
  for (int l : lab) ++sizes[l];

  double total = 0.0;
  std::vector<double> to_cluster(n_clusters);
  for (int i = 0; i < n; ++i) {
    if (sizes[lab[i]] < 2) continue;  // singleton contributes 0
    std::fill(to_cluster.begin(), to_cluster.end(), 0.0);
    for (int q = 0; q < n; ++q) {
      if (q == i) continue;
      to_cluster[lab[q]] += (features.row(i) - features.row(q)).norm();
    }
    const double a = to_cluster[lab[i]] / (sizes[lab[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_clusters; ++k) {
      if (k == lab[i] || sizes[k] == 0) continue;
      b = std::min(b, to_cluster[k] / sizes[k]);
    }
    const double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / n;
}

double calinski_harabasz(const Mat& features, const VecI& labels) {
  const int n = static_cast<int>(features.rows());
  if (labels.size() != n) throw ValidationError("calinski_harabasz: label length mismatch");
  int k = 0;
  std::vector<int> lab = compact(labels, &k);
  if (k < 2 || k >= n) throw ValidationError("calinski_harabasz: need 2 <= k < N clusters");

  const Vec grand = features.colwise().mean().transpose();
  Mat centroids = Mat::Zero(k, features.cols());
  std::vector<int> sizes(k, 0);
  for (int i = 0; i < n; ++i) {
    centroids.row(lab[i]) += features.row(i);
    ++sizes[lab[i]];
  }
  double bgss = 0.0, wgss = 0.0;
  for (int c = 0; c < k; ++c) {
    centroids.row(c) /= sizes[c];
    bgss += sizes[c] * (centroids.row(c).transpose() - grand).squaredNorm();
  }
  for (int i = 0; i < n; ++i) wgss += (features.row(i) - centroids.row(lab[i])).squaredNorm();

  if (wgss <= 0.0) return std::numeric_limits<double>::infinity();
  return (bgss / (k - 1)) / (wgss / (n - k));
}

nlohmann::json to_json(const MetricReport& report) {
  return {
      {"v_score", report.v_score},
      {"homogeneity", report.homogeneity},
      {"completeness", report.completeness},
      {"silhouette", report.silhouette},
      {"calinski_harabasz", report.calinski_harabasz},
  };
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.v_score = j.at("v_score").get<double>();
  r.homogeneity = j.at("homogeneity").get<double>();
  r.completeness = j.at("completeness").get<double>();
  r.silhouette = j.at("silhouette").get<double>();
  r.calinski_harabasz = j.at("calinski_harabasz").get<double>();
  return r;
}

MetricReport evaluate(const Mat& features, const VecI& true_labels, const VecI& pred_labels) {
  // Treat DBSCAN noise as its own cluster.
  VecI pred = pred_labels;
  int fresh = pred.size() > 0 ? pred.maxCoeff() + 1 : 0;
  for (int i = 0; i < pred.size(); ++i)
    if (pred[i] < 0) pred[i] = fresh;

  MetricReport r;
  HCV hcv = homogeneity_completeness_v(true_labels, pred);
  r.homogeneity = hcv.h;
  r.completeness = hcv.c;
  r.v_score = hcv.v;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    r.silhouette = silhouette(features, pred);
  } catch (const ValidationError&) {
    r.silhouette = nan;
  }
  try {
    r.calinski_harabasz = calinski_harabasz(features, pred);
  } catch (const ValidationError&) {
    r.calinski_harabasz = nan;
  }
  return r;
}

}  // namespace isvae::metrics

#pragma once

#include "isvae/common.hpp"

#include "json.hpp"

namespace isvae::metrics {

struct HCV {
  double h = 0.0;
  double c = 0.0;
  double v = 0.0;
};

// Homogeneity/completeness/V-measure from empirical joint counts, entropies
// in nats. Degenerate cases: h = 1 when H(classes) = 0, c = 1 when
// H(clusters) = 0, v = 0 when h + c = 0.
HCV homogeneity_completeness_v(const VecI& true_labels, const VecI& pred_labels);

// Mean silhouette with Euclidean distances. Singleton clusters contribute 0.
// Throws if fewer than two clusters are present.
double silhouette(const Mat& features, const VecI& labels);

// Calinski-Harabasz index. Returns +inf when within-cluster dispersion is 0.
double calinski_harabasz(const Mat& features, const VecI& labels);

struct MetricReport {
  double v_score = 0.0;
  double homogeneity = 0.0;
  double completeness = 0.0;
  double silhouette = 0.0;
  double calinski_harabasz = 0.0;
};

nlohmann::json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const nlohmann::json& j);

// All five metrics for one clustering. Noise labels (-1) are treated as one
// extra cluster. Unsupervised metrics that are undefined for the given
// partition (single cluster, zero dispersion) come back as NaN rather than
// throwing, so sweep runs can keep going.
MetricReport evaluate(const Mat& features, const VecI& true_labels, const VecI& pred_labels);

}  // namespace isvae::metrics

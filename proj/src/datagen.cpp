#include "isvae/datagen.hpp"

#include "isvae/spectral.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace isvae {

int Dataset::label_count() const {
  if (!labels) return 0;
  std::set<int> values(labels->begin(), labels->end());
  return static_cast<int>(values.size());
}

Dataset Dataset::rows(const std::vector<int>& idx) const {
  Dataset out;
  out.domain = domain;
  out.name = name;
  out.signals.resize(static_cast<int>(idx.size()), dim());
  if (labels) out.labels = VecI(static_cast<int>(idx.size()));
  for (int i = 0; i < static_cast<int>(idx.size()); ++i) {
    out.signals.row(i) = signals.row(idx[i]);
    if (labels) (*out.labels)[i] = (*labels)[idx[i]];
  }
  return out;
}

void Dataset::validate() const {
  if (n() < 1) throw ValidationError("Dataset: need at least one signal");
  if (!all_finite(signals)) throw ValidationError("Dataset: non-finite entries");
  if (labels) {
    if (labels->size() != n()) throw ValidationError("Dataset: label length mismatch");
    if (labels->minCoeff() < 0) throw ValidationError("Dataset: labels must be >= 0");
  }
}

namespace datagen {

std::vector<std::vector<double>> default_cluster_freqs() {
  return {
      {80, 130, 495},
      {180, 390, 596},
      {80, 130, 230, 390},
      {130, 230, 430, 530},
      {80, 180, 315, 495},
      {230, 390, 495, 596},
      {180, 230, 430, 530},
      {80, 315, 495, 596},
  };
}

namespace {

void validate_spec(const SyntheticSpec& spec) {
  if (spec.n_signals < 1) throw ValidationError("SyntheticSpec: n_signals must be >= 1");
  if (spec.length_d < 2) throw ValidationError("SyntheticSpec: length_d must be >= 2");
  if (!(spec.sampling_freq > 0)) throw ValidationError("SyntheticSpec: sampling_freq must be positive");
  if (spec.cluster_freqs.empty()) throw ValidationError("SyntheticSpec: need at least one cluster");
  if (spec.noise_var < 0) throw ValidationError("SyntheticSpec: noise_var must be >= 0");
  const int c = static_cast<int>(spec.cluster_freqs.size());
  if (spec.n_signals % c != 0)
    throw ValidationError("SyntheticSpec: cluster count must divide n_signals");
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& raw) {
  SyntheticSpec spec = raw;
  if (spec.cluster_freqs.empty()) spec.cluster_freqs = default_cluster_freqs();
  validate_spec(spec);

  const int n_clusters = static_cast<int>(spec.cluster_freqs.size());
  const int per_cluster = spec.n_signals / n_clusters;
  const int d = spec.length_d;

  Dataset out;
  out.domain = Domain::time;
  out.name = "synthetic";
  out.signals.resize(spec.n_signals, d);
  out.labels = VecI(spec.n_signals);

  // Noise-free prototypes, one per cluster.
  Mat prototypes = Mat::Zero(n_clusters, d);
  for (int c = 0; c < n_clusters; ++c)
    for (double f : spec.cluster_freqs[c])
      for (int t = 0; t < d; ++t)
        prototypes(c, t) += std::cos(2.0 * M_PI * f * t / spec.sampling_freq);

  Rng rng(spec.seed);
  std::normal_distribution<double> noise(spec.noise_mean, std::sqrt(spec.noise_var));
  int row = 0;
  for (int c = 0; c < n_clusters; ++c) {
    for (int i = 0; i < per_cluster; ++i, ++row) {
      out.signals.row(row) = prototypes.row(c);
      if (spec.noise_var > 0)
        for (int t = 0; t < d; ++t) out.signals(row, t) += noise(rng);
      (*out.labels)[row] = c;
    }
  }
  return out;
}

Dataset to_spectrum(const Dataset& dataset) {
  dataset.validate();
  if (dataset.domain != Domain::time)
    throw ValidationError("to_spectrum: input is already spectral");
  Dataset out = dataset;
  out.signals = spectral::dct2_rows(dataset.signals);
  out.domain = Domain::spectrum;
  return out;
}

Split split(const Dataset& dataset, const SplitSpec& spec) {
  dataset.validate();
  const double total = spec.train_frac + spec.test_frac + spec.val_frac;
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("SplitSpec: fractions must sum to 1");
  const int n = dataset.n();
  if (n < 8) throw ValidationError("split: need at least 8 signals");

  const int n_test = static_cast<int>(std::lround(n * spec.test_frac));
  const int n_val = static_cast<int>(std::lround(n * spec.val_frac));
  const int n_train = n - n_test - n_val;
  if (n_train < 1 || n_test < 0 || n_val < 0) throw ValidationError("split: degenerate partition sizes");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  Split out;
  out.train_idx.assign(order.begin(), order.begin() + n_train);
  out.val_idx.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test_idx.assign(order.begin() + n_train + n_val, order.end());
  out.train = dataset.rows(out.train_idx);
  out.val = dataset.rows(out.val_idx);
  out.test = dataset.rows(out.test_idx);
  return out;
}

ScalerParams fit_scaler(const Dataset& train) {
  train.validate();
  constexpr double kStdFloor = 1e-8;
  ScalerParams p;
  p.mean = train.signals.colwise().mean().transpose();
  Mat centered = train.signals.rowwise() - p.mean.transpose();
  p.stddev = (centered.array().square().colwise().mean()).sqrt().transpose();
  p.stddev = p.stddev.cwiseMax(kStdFloor);
  return p;
}

Dataset transform(const Dataset& dataset, const ScalerParams& params) {
  if (dataset.dim() != params.mean.size())
    throw ValidationError("transform: dimension mismatch with scaler params");
  Dataset out = dataset;
  out.signals = (dataset.signals.rowwise() - params.mean.transpose()).array().rowwise() /
                params.stddev.transpose().array();
  return out;
}

double global_rms(const Mat& signals) {
  if (signals.size() == 0) throw ValidationError("global_rms: empty matrix");
  return std::sqrt(signals.array().square().mean());
}

Scaled standard_scale(const Dataset& train, const std::vector<Dataset>& others) {
  for (const auto& d : others)
    if (d.dim() != train.dim()) throw ValidationError("standard_scale: dimension mismatch");
  Scaled out;
  out.params = fit_scaler(train);
  out.train = transform(train, out.params);
  out.others.reserve(others.size());
  for (const auto& d : others) out.others.push_back(transform(d, out.params));
  return out;
}

Dataset load_csv(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_csv: cannot open " + path);

  std::string header;
  if (!std::getline(in, header)) throw ValidationError("load_csv: empty file " + path);
  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    std::string tok;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
  }
  bool has_label = !cols.empty() && cols.back() == "label";
  const int d = static_cast<int>(cols.size()) - (has_label ? 1 : 0);
  if (d < 2) throw ValidationError("load_csv: need at least 2 feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* ptr = line.data();
    const char* end = ptr + line.size();
    for (int c = 0; c < d; ++c) {
      double v = 0;
      auto res = std::from_chars(ptr, end, v);
      if (res.ec != std::errc()) throw ValidationError("load_csv: bad number in row " + std::to_string(rows));
      values.push_back(v);
      ptr = res.ptr;
      if (ptr < end && *ptr == ',') ++ptr;
    }
    if (has_label) {
      int lab = 0;
      auto res = std::from_chars(ptr, end, lab);
      if (res.ec != std::errc()) throw ValidationError("load_csv: bad label in row " + std::to_string(rows));
      labels.push_back(lab);
    }
    ++rows;
  }
  if (rows == 0) throw ValidationError("load_csv: no data rows in " + path);

  Dataset out;
  out.name = name.empty() ? path : name;
  out.domain = Domain::time;
  out.signals.resize(rows, d);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < d; ++c) out.signals(i, c) = values[static_cast<size_t>(i) * d + c];
  if (has_label) {
    out.labels = VecI(rows);
    for (int i = 0; i < rows; ++i) (*out.labels)[i] = labels[i];
  }
  out.validate();
  return out;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out) throw ValidationError("save_csv: cannot open " + path);
  for (int c = 0; c < dataset.dim(); ++c) out << (c ? ",x" : "x") << c;
  if (dataset.labeled()) out << ",label";
  out << "\n";
  char buf[32];
  for (int i = 0; i < dataset.n(); ++i) {
    for (int c = 0; c < dataset.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", dataset.signals(i, c));
      if (c) out << ',';
      out << buf;
    }
    if (dataset.labeled()) out << ',' << (*dataset.labels)[i];
    out << "\n";
  }
}

nlohmann::json to_json(const SyntheticSpec& spec) {
  return {
      {"n_signals", spec.n_signals},
      {"length_d", spec.length_d},
      {"sampling_freq", spec.sampling_freq},
      {"cluster_freqs", spec.cluster_freqs.empty() ? default_cluster_freqs() : spec.cluster_freqs},
      {"noise_mean", spec.noise_mean},
      {"noise_var", spec.noise_var},
      {"seed", spec.seed},
  };
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec spec;
  spec.n_signals = j.value("n_signals", spec.n_signals);
  spec.length_d = j.value("length_d", spec.length_d);
  spec.sampling_freq = j.value("sampling_freq", spec.sampling_freq);
  if (j.contains("cluster_freqs"))
    spec.cluster_freqs = j.at("cluster_freqs").get<std::vector<std::vector<double>>>();
  spec.noise_mean = j.value("noise_mean", spec.noise_mean);
  spec.noise_var = j.value("noise_var", spec.noise_var);
  spec.seed = j.value("seed", spec.seed);
  return spec;
}

nlohmann::json to_json(const SplitSpec& spec) {
  return {
      {"train_frac", spec.train_frac},
      {"test_frac", spec.test_frac},
      {"val_frac", spec.val_frac},
      {"seed", spec.seed},
  };
}

SplitSpec split_spec_from_json(const nlohmann::json& j) {
  SplitSpec spec;
  spec.train_frac = j.value("train_frac", spec.train_frac);
  spec.test_frac = j.value("test_frac", spec.test_frac);
  spec.val_frac = j.value("val_frac", spec.val_frac);
  spec.seed = j.value("seed", spec.seed);
  return spec;
}

}  // namespace datagen
}  // namespace isvae

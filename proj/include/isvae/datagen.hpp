#pragma once

#include "isvae/common.hpp"

#include <optional>
#include <string>
#include <vector>

// vendored single-header nlohmann/json
#include "json.hpp"

namespace isvae {

enum class Domain { time, spectrum };

// N signals of fixed length D, optional integer labels, and a domain tag
// telling whether rows are raw samples or DCT coefficients.
struct Dataset {
  Mat signals;  // n x d, one signal per row
  std::optional<VecI> labels;
  Domain domain = Domain::time;
  std::string name;

  int n() const { return static_cast<int>(signals.rows()); }
  int dim() const { return static_cast<int>(signals.cols()); }
  bool labeled() const { return labels.has_value(); }
  int label_count() const;  // number of distinct label values (0 if unlabeled)
  Dataset rows(const std::vector<int>& idx) const;
  void validate() const;
};

namespace datagen {

// Sinusoid-mixture generator: cluster c's signal is
//   y[n] = sum_i cos(2 pi f_i^(c) n / sampling_freq) + eps_n,
// eps_n i.i.d. Gaussian(noise_mean, noise_var). noise_var == 0 disables the
// noise term entirely. Signals are allocated evenly across clusters.
struct SyntheticSpec {
  int n_signals = 1000;
  int length_d = 600;
  double sampling_freq = 600.0;
  std::vector<std::vector<double>> cluster_freqs;  // defaults to the 8 stock mixtures
  double noise_mean = 0.05;
  double noise_var = 0.25;
  std::uint64_t seed = 0;
};

// The 8 stock frequency mixtures (3 or 4 components each). Several exceed
// sampling_freq/2 on purpose; aliasing is part of the setup.
std::vector<std::vector<double>> default_cluster_freqs();

struct SplitSpec {
  double train_frac = 0.75;
  double test_frac = 0.125;
  double val_frac = 0.125;
  std::uint64_t seed = 0;
};

struct ScalerParams {
  Vec mean;
  Vec stddev;  // floored at 1e-8 so constant dimensions map to 0
};

Dataset generate_synthetic(const SyntheticSpec& spec);

// Row-wise DCT-II; labels and name preserved, domain flips to spectrum.
Dataset to_spectrum(const Dataset& dataset);

struct Split {
  Dataset train, val, test;
  std::vector<int> train_idx, val_idx, test_idx;
};

// Deterministic shuffled partition. val/test get round(N*frac) rows each,
// the remainder goes to train.
Split split(const Dataset& dataset, const SplitSpec& spec);

ScalerParams fit_scaler(const Dataset& train);
Dataset transform(const Dataset& dataset, const ScalerParams& params);

// Root-mean-square over all entries; used as a single-scalar amplitude
// normalizer that preserves relative structure across dimensions.
double global_rms(const Mat& signals);

struct Scaled {
  Dataset train;
  std::vector<Dataset> others;
  ScalerParams params;
};

// Per-dimension standardization with statistics from `train` only.
Scaled standard_scale(const Dataset& train, const std::vector<Dataset>& others);

// CSV: header x0,...,x{D-1}[,label]; one row per signal.
Dataset load_csv(const std::string& path, const std::string& name = "");
void save_csv(const Dataset& dataset, const std::string& path);

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SplitSpec& spec);
SplitSpec split_spec_from_json(const nlohmann::json& j);

}  // namespace datagen
}  // namespace isvae

#pragma once

#include "isvae/common.hpp"
#include "isvae/datagen.hpp"
#include "isvae/metrics.hpp"
#include "isvae/model.hpp"
#include "isvae/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace isvae::experiment {

enum class FeatureSpace { f0, f0_extended, latent_z, raw_time, raw_dct };

std::string to_string(FeatureSpace space);
FeatureSpace feature_space_from_string(const std::string& s);

struct ClustererSpec {
  std::string method = "kmeans";  // kmeans | dbscan | spectral
  std::string name;               // row label; defaults to method
  int k = 0;                      // 0 -> number of ground-truth classes
  double eps = 0.5;
  int min_pts = 5;
  double gamma = 0.0;  // 0 -> 1/dim
  int n_init = 10;
  int max_iter = 300;

  std::string id() const { return name.empty() ? method : name; }
};

nlohmann::json to_json(const ClustererSpec& spec);
ClustererSpec clusterer_spec_from_json(const nlohmann::json& j);

// Normalization applied per realization, fitted on the train partition only.
// `standard` is per-dimension standardization of the time-domain windows;
// `spectrum_rms` divides the DCT spectra by one scalar (their train RMS),
// which preserves relative bin structure. Long unnormalized spectra saturate
// the attention heads, so pick one of the two for real runs.
enum class ScaleMode { none, standard, spectrum_rms };

std::string to_string(ScaleMode mode);
ScaleMode scale_mode_from_string(const std::string& s);

struct ExperimentConfig {
  // data source: exactly one of these
  std::optional<datagen::SyntheticSpec> synthetic;
  std::string csv_path;

  std::string dataset_name = "dataset";
  datagen::SplitSpec split;
  ScaleMode scale = ScaleMode::standard;

  // model grid
  std::vector<int> j_values = {4, 5, 6};
  double sigma = 6.0;
  int latent_k = 3;
  std::vector<DecoderKind> decoders = {DecoderKind::vanilla, DecoderKind::attentive};
  std::vector<int> attention_hidden, encoder_hidden, decoder_hidden, vae_encoder_hidden;
  int cnn_channels = 3;
  int cnn_kernel = 3;
  double nu = 1.0;

  training::TrainConfig train;
  std::vector<ClustererSpec> clusterers = {ClustererSpec{}};
  std::vector<FeatureSpace> feature_spaces = {FeatureSpace::f0, FeatureSpace::f0_extended,
                                              FeatureSpace::latent_z};
  bool include_baselines = true;
  bool include_vanilla_vae = true;
  int n_realizations = 6;
  int baseline_realizations = 100;
  std::uint64_t base_seed = 0;
  std::string output_dir = "isvae_run";
  int max_workers = 0;  // 0 -> hardware concurrency
  bool z_mean = false;  // export posterior means instead of samples

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct ResultRow {
  std::string variant;  // time | dct | vanilla_vae | isvae_vanilla | isvae_attentive
  int j = -1;           // -1 where no filter bank applies
  std::string feature_space;
  std::string clusterer;
  int realizations = 0;
  double v_mean = 0, v_std = 0;
  double h_mean = 0, h_std = 0;
  double c_mean = 0, c_std = 0;
  double sil_mean = 0, sil_std = 0;
  double ch_mean = 0, ch_std = 0;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
  int excluded_runs = 0;

  void save_csv(const std::string& path) const;
  nlohmann::json to_json() const;
};

// Full protocol: per realization r (seed = base_seed + r) split -> scale ->
// DCT -> train each grid variant with validation-V-score model selection ->
// extract features on test -> run the clusterer grid -> score; then aggregate
// mean +/- std across realizations. Artifacts land under cfg.output_dir.
// Failed realizations are excluded with a warning, never averaged.
ResultsTable run_experiment(const ExperimentConfig& cfg);

// Post-hoc plot bundles from a finished run directory: per trained variant a
// f0 scatter (index, f_1..f_J, true_label, pred_label) from realization 0 and
// the per-class filter-evolution table.
void emit_plot_data(const std::string& run_dir);

}  // namespace isvae::experiment

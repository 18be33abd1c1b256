#pragma once

#include "isvae/common.hpp"
#include "isvae/datagen.hpp"
#include "isvae/model.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace isvae::training {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  int stop_window = 30;     // W; 0 disables the stability stop
  double stop_tol = 0.005;  // epsilon on the per-dimension f0-mean range
  int log_every = 1;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double elbo = 0.0;
  double recon_loglik = 0.0;
  double kl = 0.0;
  Vec f0_mean;                                 // per-dimension dataset mean of f0
  Mat f0_class_mean;                           // classes x J; 0x0 when unlabeled
  double val_vscore = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingTrace {
  std::vector<EpochRecord> records;
  std::vector<int> class_values;  // label values behind f0_class_mean rows
  bool has_val_vscore = false;

  void save_csv(const std::string& path) const;
  void save_class_csv(const std::string& path) const;
};

// True iff every f0 dimension's mean moved less than tol (max - min) over the
// last `window` epochs. Traces shorter than the window never stop.
bool should_stop(const TrainingTrace& trace, int window, double tol);

struct TrainResult {
  Checkpoint final_checkpoint;
  Checkpoint best_checkpoint;  // peak validation V-score; == final without validation
  int best_epoch = 0;          // 1-based; 0 = no validation scoring
  int stop_epoch = 0;          // epoch after which training halted
  TrainingTrace trace;
};

// Initial parameters for (config, seed); train() with 0 epochs returns this.
Checkpoint initial_checkpoint(const ModelConfig& cfg, std::uint64_t seed);
Checkpoint initial_vae_checkpoint(const ModelConfig& cfg, std::uint64_t seed);

// Minimize -ELBO with Adam over mini-batches. Inputs must be in the spectrum
// domain. The attentive decoder's periodogram is computed from train_set only
// and frozen. When val_set carries labels, each epoch is scored by k-means on
// the validation f0 (k = number of label values) and the checkpoint with the
// best score is retained.
TrainResult train(const ModelConfig& cfg, const TrainConfig& tc, const Dataset& train_set,
                  const Dataset* val_set = nullptr);

// Same loop for the no-filter-bank baseline; validation scoring uses the
// latent space instead of f0.
TrainResult train_vanilla_vae(const ModelConfig& cfg, const TrainConfig& tc,
                              const Dataset& train_set, const Dataset* val_set = nullptr);

struct FeatureSet {
  Mat f0;        // N x J
  Mat z;         // N x K
  Mat extended;  // N x 2J: f0 columns then per-band energies
};

// Frozen-checkpoint feature export; touches no parameters. z is one seeded
// posterior sample unless z_mean is set.
FeatureSet extract_features(const Checkpoint& ckpt, const Dataset& spectra, std::uint64_t seed,
                            bool z_mean = false);

// Latent samples from a vanilla VAE checkpoint.
Mat extract_vae_latent(const Checkpoint& ckpt, const Dataset& spectra, std::uint64_t seed,
                       bool z_mean = false);

}  // namespace isvae::training

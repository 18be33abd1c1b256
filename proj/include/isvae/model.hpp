#pragma once

#include "isvae/common.hpp"
#include "isvae/nn.hpp"

#include "json.hpp"

#include <string>
#include <utility>
#include <vector>

namespace isvae {

enum class DecoderKind { vanilla, attentive };

std::string to_string(DecoderKind kind);
DecoderKind decoder_kind_from_string(const std::string& s);

struct ModelConfig {
  int d = 0;           // input spectrum length
  int j = 2;           // number of filters
  double sigma = 15.0; // filter bandwidth, in frequency bins
  int k = 2;           // latent dimension
  DecoderKind decoder_kind = DecoderKind::vanilla;
  int cnn_channels = 3;
  int cnn_kernel = 3;
  std::vector<int> attention_hidden = {36, 20, 10};
  std::vector<int> encoder_hidden;      // empty -> {j}
  std::vector<int> decoder_hidden = {70, 150, 300};
  std::vector<int> vae_encoder_hidden;  // baseline VAE; empty -> reversed decoder_hidden
  double nu = 1.0;  // decoder output variance

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Defaults sized by input dimensionality (wide nets for long spectra,
// compact ones for sensor-window lengths).
ModelConfig make_default_config(int d, int j, double sigma, int k, DecoderKind kind);

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct FilterBankOutput {
  Mat f0;                      // batch x J, entries in [0,1]
  std::vector<Mat> residuals;  // J branch inputs; residuals[0] is the raw spectrum
  std::vector<Mat> filtered;   // J filtered components h_j (.) x
};

struct GaussianPosterior {
  Mat mean;     // batch x K
  Mat log_var;  // batch x K, clamped to [-10, 10]
};

struct ElboTerms {
  double recon_loglik = 0.0;
  double kl = 0.0;
  double elbo = 0.0;
};

// KL( N(mean, diag exp(log_var)) || N(0, I) ), closed form.
double kl_to_standard_normal(const Vec& mean, const Vec& log_var);

// Single-sample ELBO for one signal under a Gaussian observation model with
// variance nu: recon = -||x - xhat||^2/(2 nu) - (D/2) log(2 pi nu).
ElboTerms elbo_terms(const Vec& x, const Vec& mean_xhat, const Vec& post_mean,
                     const Vec& post_log_var, double nu);

struct Checkpoint {
  std::string model_type;  // "isvae" or "vanilla_vae"
  ModelConfig config;
  std::vector<std::pair<std::string, std::vector<double>>> tensors;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
  bool operator==(const Checkpoint&) const = default;
};

// Sequential attentive filter bank feeding a VAE whose encoder sees only the
// J filter center frequencies. Forward methods cache activations; the
// matching backward must be called before the next forward on the same
// instance. One instance is single-threaded; distinct instances are
// independent.
class IsvaeModel {
 public:
  IsvaeModel(const ModelConfig& cfg, Rng& rng);
  explicit IsvaeModel(const Checkpoint& ckpt);

  const ModelConfig& config() const { return cfg_; }

  FilterBankOutput filter_bank_forward(const Mat& x);
  Mat filter_bank_backward(const Mat& df0);  // returns d(loss)/d(input spectrum)

  GaussianPosterior encode(const Mat& f0);
  Mat encode_backward(const Mat& dmean, const Mat& dlogvar);  // returns d f0

  static Mat reparameterize(const GaussianPosterior& post, const Mat& noise);

  Mat decode_vanilla(const Mat& z);
  Mat decode_vanilla_backward(const Mat& dxhat);

  // Returns (mean_xhat, f0_hat). Requires a periodogram.
  std::pair<Mat, Mat> decode_attentive(const Mat& z, const Vec& p_x);
  Mat decode_attentive_backward(const Mat& dxhat, const Mat& df0hat);
  const Mat& last_filtered_reconstruction() const { return xfilt_cache_; }

  void set_periodogram(const Vec& p_x);
  bool has_periodogram() const { return has_p_x_; }
  const Vec& periodogram() const;

  struct ForwardResult {
    FilterBankOutput fb;
    GaussianPosterior post;
    Mat z;
    Mat mean_xhat;
  };
  ForwardResult forward(const Mat& x, const Mat& noise);

  // Batch-mean ELBO terms, forward only.
  ElboTerms evaluate(const Mat& x, const Mat& noise);

  struct StepStats {
    double loss = 0.0;  // -elbo, the minimized quantity
    double recon_loglik = 0.0;
    double kl = 0.0;
  };
  // Forward + backward on a batch; gradients accumulate into the layers.
  StepStats forward_backward(const Mat& x, const Mat& noise);

  std::vector<nn::ParamRef> params();
  void zero_grad();
  Checkpoint to_checkpoint() const;

 private:
  struct Branch {
    nn::Conv1d conv;
    nn::MaxPool1d pool;
    nn::Mlp attn;
    Mat relu_cache;  // post-relu pooled features
    Mat taps;        // batch x D gaussian taps of this branch
    Branch(const ModelConfig& cfg);
  };

  Mat branch_forward(Branch& br, const Mat& r);
  Mat branch_backward(Branch& br, const Mat& da);

  Mat gaussian_taps_batch(const Mat& centers_col) const;  // batch x D
  Vec gaussian_taps_grad(const Mat& taps, const Mat& centers_col, const Mat& dtaps) const;

  ModelConfig cfg_;
  std::vector<Branch> branches_;
  nn::Mlp encoder_;
  nn::Mlp dec_;      // vanilla decoder
  nn::Mlp dec_f0_;   // attentive: z -> f0_hat
  nn::Mlp dec_mix_;  // attentive: [x_filt, z] -> mean_xhat

  Vec p_x_;
  bool has_p_x_ = false;

  // forward caches
  Mat x_cache_;
  FilterBankOutput fb_cache_;
  Mat clamp_mask_;
  GaussianPosterior post_cache_;
  Mat eps_cache_;
  Mat f0hat_cache_;
  std::vector<Mat> taps_hat_cache_;
  Mat xfilt_cache_;
};

// Baseline VAE: encoder consumes the full spectrum, no filter bank.
class VanillaVae {
 public:
  VanillaVae(const ModelConfig& cfg, Rng& rng);
  explicit VanillaVae(const Checkpoint& ckpt);

  const ModelConfig& config() const { return cfg_; }

  GaussianPosterior encode(const Mat& x);
  Mat encode_backward(const Mat& dmean, const Mat& dlogvar);
  Mat decode(const Mat& z);
  Mat decode_backward(const Mat& dxhat);

  struct ForwardResult {
    GaussianPosterior post;
    Mat z;
    Mat mean_xhat;
  };
  ForwardResult forward(const Mat& x, const Mat& noise);
  ElboTerms evaluate(const Mat& x, const Mat& noise);
  IsvaeModel::StepStats forward_backward(const Mat& x, const Mat& noise);

  std::vector<nn::ParamRef> params();
  void zero_grad();
  Checkpoint to_checkpoint() const;

 private:
  ModelConfig cfg_;
  nn::Mlp encoder_;
  nn::Mlp decoder_;
  Mat clamp_mask_;
  GaussianPosterior post_cache_;
  Mat eps_cache_;
  Mat x_cache_;
};

}  // namespace isvae

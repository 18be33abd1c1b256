#include "isvae/model.hpp"

#include "isvae/spectral.hpp"

#include <cmath>
#include <fstream>

namespace isvae {

namespace {

constexpr double kLogVarClamp = 10.0;

std::vector<int> with_ends(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes;
  sizes.push_back(in);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

int pooled_width(const ModelConfig& cfg) { return (cfg.d - 3) / 2 + 1; }

ModelConfig normalized(ModelConfig cfg) {
  cfg.validate();
  if (cfg.encoder_hidden.empty()) cfg.encoder_hidden = {cfg.j};
  if (cfg.vae_encoder_hidden.empty())
    cfg.vae_encoder_hidden.assign(cfg.decoder_hidden.rbegin(), cfg.decoder_hidden.rend());
  return cfg;
}

std::vector<int> attention_sizes(const ModelConfig& cfg) {
  return with_ends(cfg.cnn_channels * pooled_width(cfg), cfg.attention_hidden, 1);
}

std::vector<int> encoder_sizes(const ModelConfig& cfg) {
  return with_ends(cfg.j, cfg.encoder_hidden, 2 * cfg.k);
}

std::vector<int> vanilla_decoder_sizes(const ModelConfig& cfg) {
  return with_ends(cfg.k, cfg.decoder_hidden, cfg.d);
}

std::vector<int> theta1_sizes(const ModelConfig& cfg) {
  return with_ends(cfg.k, std::vector<int>{cfg.j, cfg.j}, cfg.j);
}

std::vector<int> theta2_sizes(const ModelConfig& cfg) {
  return with_ends(cfg.d + cfg.k, cfg.decoder_hidden, cfg.d);
}

std::vector<int> vae_encoder_sizes(const ModelConfig& cfg) {
  return with_ends(cfg.d, cfg.vae_encoder_hidden, 2 * cfg.k);
}

}  // namespace

std::string to_string(DecoderKind kind) {
  return kind == DecoderKind::vanilla ? "vanilla" : "attentive";
}

DecoderKind decoder_kind_from_string(const std::string& s) {
  if (s == "vanilla") return DecoderKind::vanilla;
  if (s == "attentive") return DecoderKind::attentive;
  throw ValidationError("unknown decoder kind: " + s);
}

void ModelConfig::validate() const {
  if (d < 4) throw ValidationError("ModelConfig: d must be >= 4");
  if (j < 1) throw ValidationError("ModelConfig: j must be >= 1");
  if (k < 1) throw ValidationError("ModelConfig: k must be >= 1");
  if (!(sigma > 0)) throw ValidationError("ModelConfig: sigma must be positive");
  if (!(nu > 0)) throw ValidationError("ModelConfig: nu must be positive");
  if (cnn_channels < 1) throw ValidationError("ModelConfig: cnn_channels must be >= 1");
  if (cnn_kernel < 1 || cnn_kernel % 2 == 0)
    throw ValidationError("ModelConfig: cnn_kernel must be a positive odd number");
  for (int h : attention_hidden)
    if (h < 1) throw ValidationError("ModelConfig: attention_hidden sizes must be positive");
  for (int h : encoder_hidden)
    if (h < 1) throw ValidationError("ModelConfig: encoder_hidden sizes must be positive");
  for (int h : decoder_hidden)
    if (h < 1) throw ValidationError("ModelConfig: decoder_hidden sizes must be positive");
}

ModelConfig make_default_config(int d, int j, double sigma, int k, DecoderKind kind) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.j = j;
  cfg.sigma = sigma;
  cfg.k = k;
  cfg.decoder_kind = kind;
  if (d >= 256) {
    cfg.attention_hidden = {36, 20, 10};
    cfg.decoder_hidden = {70, 150, 300};
  } else {
    cfg.attention_hidden = {6, 5};
    cfg.decoder_hidden = {20, 40, 80};
  }
  return cfg;
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {
      {"D", cfg.d},
      {"J", cfg.j},
      {"sigma", cfg.sigma},
      {"K", cfg.k},
      {"decoder_kind", to_string(cfg.decoder_kind)},
      {"cnn_channels", cfg.cnn_channels},
      {"cnn_kernel", cfg.cnn_kernel},
      {"attention_hidden", cfg.attention_hidden},
      {"encoder_hidden", cfg.encoder_hidden},
      {"decoder_hidden", cfg.decoder_hidden},
      {"vae_encoder_hidden", cfg.vae_encoder_hidden},
      {"nu", cfg.nu},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.d = j.at("D").get<int>();
  cfg.j = j.at("J").get<int>();
  cfg.sigma = j.value("sigma", cfg.sigma);
  cfg.k = j.at("K").get<int>();
  cfg.decoder_kind = decoder_kind_from_string(j.value("decoder_kind", "vanilla"));
  cfg.cnn_channels = j.value("cnn_channels", cfg.cnn_channels);
  cfg.cnn_kernel = j.value("cnn_kernel", cfg.cnn_kernel);
  if (j.contains("attention_hidden")) cfg.attention_hidden = j.at("attention_hidden").get<std::vector<int>>();
  if (j.contains("encoder_hidden")) cfg.encoder_hidden = j.at("encoder_hidden").get<std::vector<int>>();
  if (j.contains("decoder_hidden")) cfg.decoder_hidden = j.at("decoder_hidden").get<std::vector<int>>();
  if (j.contains("vae_encoder_hidden")) cfg.vae_encoder_hidden = j.at("vae_encoder_hidden").get<std::vector<int>>();
  cfg.nu = j.value("nu", cfg.nu);
  return cfg;
}

double kl_to_standard_normal(const Vec& mean, const Vec& log_var) {
  if (mean.size() != log_var.size()) throw ValidationError("kl: mean/log_var size mismatch");
  return 0.5 * (mean.array().square() + log_var.array().exp() - 1.0 - log_var.array()).sum();
}

ElboTerms elbo_terms(const Vec& x, const Vec& mean_xhat, const Vec& post_mean,
                     const Vec& post_log_var, double nu) {
  if (x.size() != mean_xhat.size()) throw ValidationError("elbo: x/xhat length mismatch");
  if (!(nu > 0)) throw ValidationError("elbo: nu must be positive");
  ElboTerms t;
  const double d = static_cast<double>(x.size());
  t.recon_loglik = -(x - mean_xhat).squaredNorm() / (2.0 * nu) - 0.5 * d * std::log(2.0 * M_PI * nu);
  t.kl = kl_to_standard_normal(post_mean, post_log_var);
  t.elbo = t.recon_loglik - t.kl;
  return t;
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

void Checkpoint::save(const std::string& path) const {
  nlohmann::json j;
  j["model_type"] = model_type;
  j["config"] = to_json(config);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, values] : tensors) arr.push_back({{"name", name}, {"values", values}});
  j["tensors"] = std::move(arr);
  std::ofstream out(path);
  if (!out) throw TrainingError("Checkpoint::save: cannot open " + path);
  out << j.dump();
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TrainingError("Checkpoint::load: cannot open " + path);
  nlohmann::json j;
  in >> j;
  Checkpoint ckpt;
  ckpt.model_type = j.at("model_type").get<std::string>();
  ckpt.config = model_config_from_json(j.at("config"));
  for (const auto& t : j.at("tensors"))
    ckpt.tensors.emplace_back(t.at("name").get<std::string>(),
                              t.at("values").get<std::vector<double>>());
  return ckpt;
}

namespace {

// Throwaway generator for checkpoint restores; every value it seeds is
// overwritten by the stored tensors.
Rng& scratch_rng() {
  static thread_local Rng rng;
  rng.seed(0);
  return rng;
}

void load_into(const Checkpoint& ckpt, std::vector<nn::ParamRef> refs,
               Vec* periodogram_out) {
  std::vector<bool> seen(refs.size(), false);
  for (const auto& [name, values] : ckpt.tensors) {
    if (name == "periodogram") {
      if (periodogram_out) *periodogram_out = Eigen::Map<const Vec>(values.data(), values.size());
      continue;
    }
    bool found = false;
    for (size_t i = 0; i < refs.size(); ++i) {
      if (refs[i].name != name) continue;
      if (refs[i].size != static_cast<int>(values.size()))
        throw TrainingError("checkpoint tensor size mismatch for " + name);
      std::copy(values.begin(), values.end(), refs[i].value);
      seen[i] = found = true;
      break;
    }
    if (!found) throw TrainingError("checkpoint has unknown tensor " + name);
  }
  for (size_t i = 0; i < refs.size(); ++i)
    if (!seen[i]) throw TrainingError("checkpoint missing tensor " + refs[i].name);
}

std::vector<std::pair<std::string, std::vector<double>>> dump_params(
    std::vector<nn::ParamRef> refs) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  out.reserve(refs.size());
  for (const auto& r : refs)
    out.emplace_back(r.name, std::vector<double>(r.value, r.value + r.size));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// IsvaeModel
// ---------------------------------------------------------------------------

IsvaeModel::Branch::Branch(const ModelConfig& cfg)
    : conv(cfg.cnn_channels, cfg.cnn_kernel, cfg.d),
      pool(cfg.cnn_channels, cfg.d),
      attn(attention_sizes(cfg), nn::Activation::relu, nn::Activation::sigmoid) {}

IsvaeModel::IsvaeModel(const ModelConfig& cfg, Rng& rng)
    : cfg_(normalized(cfg)),
      encoder_(encoder_sizes(cfg_), nn::Activation::relu, nn::Activation::none),
      dec_(vanilla_decoder_sizes(cfg_), nn::Activation::relu, nn::Activation::none),
      dec_f0_(theta1_sizes(cfg_), nn::Activation::relu, nn::Activation::sigmoid),
      dec_mix_(theta2_sizes(cfg_), nn::Activation::relu, nn::Activation::none) {
  branches_.reserve(cfg_.j);
  for (int j = 0; j < cfg_.j; ++j) branches_.emplace_back(cfg_);
  for (auto& br : branches_) {
    br.conv.init(rng);
    br.attn.init(rng);
  }
  encoder_.init(rng);
  if (cfg_.decoder_kind == DecoderKind::vanilla) {
    dec_.init(rng);
  } else {
    dec_f0_.init(rng);
    dec_mix_.init(rng);
  }
}

IsvaeModel::IsvaeModel(const Checkpoint& ckpt) : IsvaeModel(ckpt.config, scratch_rng()) {
  if (ckpt.model_type != "isvae") throw TrainingError("checkpoint is not an isvae model");
  Vec p;
  load_into(ckpt, params(), &p);
  if (p.size() > 0) set_periodogram(p);
}

Mat IsvaeModel::gaussian_taps_batch(const Mat& centers_col) const {
  const int batch = static_cast<int>(centers_col.rows());
  Mat taps(batch, cfg_.d);
  for (int i = 0; i < batch; ++i)
    taps.row(i) = spectral::gaussian_taps(centers_col(i, 0), cfg_.sigma, cfg_.d).transpose();
  return taps;
}

Vec IsvaeModel::gaussian_taps_grad(const Mat& taps, const Mat& centers_col,
                                   const Mat& dtaps) const {
  // d taps[k] / d center = taps[k] * (k - center*D) * D / sigma^2
  const int batch = static_cast<int>(centers_col.rows());
  const double scale = cfg_.d / (cfg_.sigma * cfg_.sigma);
  Vec g = Vec::Zero(batch);
  for (int i = 0; i < batch; ++i) {
    const double peak = centers_col(i, 0) * cfg_.d;
    for (int k = 0; k < cfg_.d; ++k)
      g[i] += dtaps(i, k) * taps(i, k) * (k - peak) * scale;
  }
  return g;
}

Mat IsvaeModel::branch_forward(Branch& br, const Mat& r) {
  Mat pooled = br.pool.forward(br.conv.forward(r));
  br.relu_cache = nn::apply_activation(pooled, nn::Activation::relu);
  return br.attn.forward(br.relu_cache);
}

Mat IsvaeModel::branch_backward(Branch& br, const Mat& da) {
  Mat ga = br.attn.backward(da);
  Mat gp = nn::activation_grad_from_output(br.relu_cache, ga, nn::Activation::relu);
  return br.conv.backward(br.pool.backward(gp));
}

FilterBankOutput IsvaeModel::filter_bank_forward(const Mat& x) {
  if (x.cols() != cfg_.d) throw ValidationError("filter_bank_forward: spectrum length mismatch");
  const int batch = static_cast<int>(x.rows());
  x_cache_ = x;
  fb_cache_.f0.resize(batch, cfg_.j);
  fb_cache_.residuals.assign(cfg_.j, Mat());
  fb_cache_.filtered.assign(cfg_.j, Mat());

  Mat r = x;
  for (int j = 0; j < cfg_.j; ++j) {
    fb_cache_.residuals[j] = r;
    Mat a = branch_forward(branches_[j], r);
    fb_cache_.f0.col(j) = a.col(0);
    branches_[j].taps = gaussian_taps_batch(a);
    fb_cache_.filtered[j] = branches_[j].taps.cwiseProduct(x);
    if (j + 1 < cfg_.j) r -= fb_cache_.filtered[j];
  }
  return fb_cache_;
}

Mat IsvaeModel::filter_bank_backward(const Mat& df0) {
  const int batch = static_cast<int>(x_cache_.rows());
  if (df0.rows() != batch || df0.cols() != cfg_.j)
    throw ValidationError("filter_bank_backward: df0 shape mismatch");

  Mat g_next = Mat::Zero(batch, cfg_.d);  // d loss / d residual_{j+1}
  Mat dx = Mat::Zero(batch, cfg_.d);
  for (int j = cfg_.j - 1; j >= 0; --j) {
    Mat da = df0.col(j);
    if (j + 1 < cfg_.j) {
      // filtered_j is subtracted from every later residual, collected in g_next
      Mat dy = -g_next;
      Mat dtaps = dy.cwiseProduct(x_cache_);
      da += gaussian_taps_grad(branches_[j].taps, fb_cache_.f0.col(j), dtaps);
      dx += dy.cwiseProduct(branches_[j].taps);
    }
    g_next += branch_backward(branches_[j], da);
  }
  return dx + g_next;  // residual_0 is the input itself
}

GaussianPosterior IsvaeModel::encode(const Mat& f0) {
  if (f0.cols() != cfg_.j) throw ValidationError("encode: f0 width mismatch");
  Mat out = encoder_.forward(f0);
  GaussianPosterior post;
  post.mean = out.leftCols(cfg_.k);
  Mat raw = out.rightCols(cfg_.k);
  clamp_mask_ = ((raw.array() > -kLogVarClamp) && (raw.array() < kLogVarClamp)).cast<double>();
  post.log_var = raw.cwiseMax(-kLogVarClamp).cwiseMin(kLogVarClamp);
  post_cache_ = post;
  return post;
}

Mat IsvaeModel::encode_backward(const Mat& dmean, const Mat& dlogvar) {
  Mat g(dmean.rows(), 2 * cfg_.k);
  g << dmean, dlogvar.cwiseProduct(clamp_mask_);
  return encoder_.backward(g);
}

Mat IsvaeModel::reparameterize(const GaussianPosterior& post, const Mat& noise) {
  if (noise.rows() != post.mean.rows() || noise.cols() != post.mean.cols())
    throw ValidationError("reparameterize: noise shape mismatch");
  return post.mean + (post.log_var.array() * 0.5).exp().matrix().cwiseProduct(noise);
}

Mat IsvaeModel::decode_vanilla(const Mat& z) {
  if (z.cols() != cfg_.k) throw ValidationError("decode_vanilla: z width mismatch");
  return dec_.forward(z);
}

Mat IsvaeModel::decode_vanilla_backward(const Mat& dxhat) { return dec_.backward(dxhat); }

void IsvaeModel::set_periodogram(const Vec& p_x) {
  if (p_x.size() != cfg_.d) throw ValidationError("set_periodogram: length mismatch");
  p_x_ = p_x;
  has_p_x_ = true;
}

const Vec& IsvaeModel::periodogram() const {
  if (!has_p_x_) throw TrainingError("attentive decoder requires a periodogram");
  return p_x_;
}

std::pair<Mat, Mat> IsvaeModel::decode_attentive(const Mat& z, const Vec& p_x) {
  if (z.cols() != cfg_.k) throw ValidationError("decode_attentive: z width mismatch");
  if (p_x.size() != cfg_.d) throw ValidationError("decode_attentive: periodogram length mismatch");
  const int batch = static_cast<int>(z.rows());
  f0hat_cache_ = dec_f0_.forward(z);
  taps_hat_cache_.assign(cfg_.j, Mat());
  xfilt_cache_ = Mat::Zero(batch, cfg_.d);
  for (int j = 0; j < cfg_.j; ++j) {
    taps_hat_cache_[j] = gaussian_taps_batch(f0hat_cache_.col(j));
    xfilt_cache_ += (taps_hat_cache_[j].array().rowwise() * p_x.transpose().array()).matrix();
  }
  Mat u(batch, cfg_.d + cfg_.k);
  u << xfilt_cache_, z;
  return {dec_mix_.forward(u), f0hat_cache_};
}

Mat IsvaeModel::decode_attentive_backward(const Mat& dxhat, const Mat& df0hat) {
  Mat du = dec_mix_.backward(dxhat);
  Mat dxfilt = du.leftCols(cfg_.d);
  Mat dz = du.rightCols(cfg_.k);
  Mat g_f0hat = df0hat.size() == 0
                    ? Mat::Zero(f0hat_cache_.rows(), cfg_.j)
                    : df0hat;
  Mat dtaps = (dxfilt.array().rowwise() * p_x_.transpose().array()).matrix();
  for (int j = 0; j < cfg_.j; ++j)
    g_f0hat.col(j) += gaussian_taps_grad(taps_hat_cache_[j], f0hat_cache_.col(j), dtaps);
  dz += dec_f0_.backward(g_f0hat);
  return dz;
}

IsvaeModel::ForwardResult IsvaeModel::forward(const Mat& x, const Mat& noise) {
  ForwardResult r;
  r.fb = filter_bank_forward(x);
  r.post = encode(r.fb.f0);
  eps_cache_ = noise;
  r.z = reparameterize(r.post, noise);
  if (cfg_.decoder_kind == DecoderKind::vanilla)
    r.mean_xhat = decode_vanilla(r.z);
  else
    r.mean_xhat = decode_attentive(r.z, periodogram()).first;
  return r;
}

namespace {

IsvaeModel::StepStats batch_terms(const Mat& x, const Mat& xhat, const GaussianPosterior& post,
                                  double nu) {
  const double batch = static_cast<double>(x.rows());
  const double d = static_cast<double>(x.cols());
  IsvaeModel::StepStats s;
  s.recon_loglik = -(xhat - x).squaredNorm() / (2.0 * nu * batch) - 0.5 * d * std::log(2.0 * M_PI * nu);
  s.kl = 0.5 *
         (post.mean.array().square() + post.log_var.array().exp() - 1.0 - post.log_var.array())
             .sum() /
         batch;
  s.loss = -(s.recon_loglik - s.kl);
  return s;
}

}  // namespace

ElboTerms IsvaeModel::evaluate(const Mat& x, const Mat& noise) {
  ForwardResult r = forward(x, noise);
  StepStats s = batch_terms(x, r.mean_xhat, r.post, cfg_.nu);
  return {s.recon_loglik, s.kl, s.recon_loglik - s.kl};
}

IsvaeModel::StepStats IsvaeModel::forward_backward(const Mat& x, const Mat& noise) {
  ForwardResult r = forward(x, noise);
  const double batch = static_cast<double>(x.rows());
  StepStats stats = batch_terms(x, r.mean_xhat, r.post, cfg_.nu);

  Mat dxhat = (r.mean_xhat - x) / (cfg_.nu * batch);
  Mat dz = cfg_.decoder_kind == DecoderKind::vanilla
               ? decode_vanilla_backward(dxhat)
               : decode_attentive_backward(dxhat, Mat());

  Mat std_half = (r.post.log_var.array() * 0.5).exp().matrix();
  Mat dmean = r.post.mean / batch + dz;
  Mat dlogvar = (r.post.log_var.array().exp() - 1.0).matrix() / (2.0 * batch) +
                0.5 * dz.cwiseProduct(eps_cache_).cwiseProduct(std_half);
  Mat df0 = encode_backward(dmean, dlogvar);
  filter_bank_backward(df0);
  return stats;
}

std::vector<nn::ParamRef> IsvaeModel::params() {
  std::vector<nn::ParamRef> out;
  for (size_t j = 0; j < branches_.size(); ++j) {
    const std::string prefix = "fb." + std::to_string(j);
    branches_[j].conv.collect(prefix + ".conv", out);
    branches_[j].attn.collect(prefix + ".attn", out);
  }
  encoder_.collect("enc", out);
  if (cfg_.decoder_kind == DecoderKind::vanilla) {
    dec_.collect("dec", out);
  } else {
    dec_f0_.collect("dec_f0", out);
    dec_mix_.collect("dec_mix", out);
  }
  return out;
}

void IsvaeModel::zero_grad() {
  for (auto& br : branches_) {
    br.conv.zero_grad();
    br.attn.zero_grad();
  }
  encoder_.zero_grad();
  dec_.zero_grad();
  dec_f0_.zero_grad();
  dec_mix_.zero_grad();
}

Checkpoint IsvaeModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.model_type = "isvae";
  ckpt.config = cfg_;
  ckpt.tensors = dump_params(const_cast<IsvaeModel*>(this)->params());
  if (has_p_x_)
    ckpt.tensors.emplace_back("periodogram", std::vector<double>(p_x_.data(), p_x_.data() + p_x_.size()));
  return ckpt;
}

// ---------------------------------------------------------------------------
// VanillaVae
// ---------------------------------------------------------------------------

VanillaVae::VanillaVae(const ModelConfig& cfg, Rng& rng)
    : cfg_(normalized(cfg)),
      encoder_(vae_encoder_sizes(cfg_), nn::Activation::relu, nn::Activation::none),
      decoder_(vanilla_decoder_sizes(cfg_), nn::Activation::relu, nn::Activation::none) {
  encoder_.init(rng);
  decoder_.init(rng);
}

VanillaVae::VanillaVae(const Checkpoint& ckpt) : VanillaVae(ckpt.config, scratch_rng()) {
  if (ckpt.model_type != "vanilla_vae") throw TrainingError("checkpoint is not a vanilla_vae model");
  load_into(ckpt, params(), nullptr);
}

GaussianPosterior VanillaVae::encode(const Mat& x) {
  if (x.cols() != cfg_.d) throw ValidationError("VanillaVae::encode: width mismatch");
  x_cache_ = x;
  Mat out = encoder_.forward(x);
  GaussianPosterior post;
  post.mean = out.leftCols(cfg_.k);
  Mat raw = out.rightCols(cfg_.k);
  clamp_mask_ = ((raw.array() > -kLogVarClamp) && (raw.array() < kLogVarClamp)).cast<double>();
  post.log_var = raw.cwiseMax(-kLogVarClamp).cwiseMin(kLogVarClamp);
  post_cache_ = post;
  return post;
}

Mat VanillaVae::encode_backward(const Mat& dmean, const Mat& dlogvar) {
  Mat g(dmean.rows(), 2 * cfg_.k);
  g << dmean, dlogvar.cwiseProduct(clamp_mask_);
  return encoder_.backward(g);
}

Mat VanillaVae::decode(const Mat& z) { return decoder_.forward(z); }
Mat VanillaVae::decode_backward(const Mat& dxhat) { return decoder_.backward(dxhat); }

VanillaVae::ForwardResult VanillaVae::forward(const Mat& x, const Mat& noise) {
  ForwardResult r;
  r.post = encode(x);
  eps_cache_ = noise;
  r.z = IsvaeModel::reparameterize(r.post, noise);
  r.mean_xhat = decode(r.z);
  return r;
}

ElboTerms VanillaVae::evaluate(const Mat& x, const Mat& noise) {
  ForwardResult r = forward(x, noise);
  auto s = batch_terms(x, r.mean_xhat, r.post, cfg_.nu);
  return {s.recon_loglik, s.kl, s.recon_loglik - s.kl};
}

IsvaeModel::StepStats VanillaVae::forward_backward(const Mat& x, const Mat& noise) {
  ForwardResult r = forward(x, noise);
  const double batch = static_cast<double>(x.rows());
  auto stats = batch_terms(x, r.mean_xhat, r.post, cfg_.nu);

  Mat dxhat = (r.mean_xhat - x) / (cfg_.nu * batch);
  Mat dz = decode_backward(dxhat);
  Mat std_half = (r.post.log_var.array() * 0.5).exp().matrix();
  Mat dmean = r.post.mean / batch + dz;
  Mat dlogvar = (r.post.log_var.array().exp() - 1.0).matrix() / (2.0 * batch) +
                0.5 * dz.cwiseProduct(eps_cache_).cwiseProduct(std_half);
  encode_backward(dmean, dlogvar);
  return stats;
}

std::vector<nn::ParamRef> VanillaVae::params() {
  std::vector<nn::ParamRef> out;
  encoder_.collect("enc", out);
  decoder_.collect("dec", out);
  return out;
}

void VanillaVae::zero_grad() {
  encoder_.zero_grad();
  decoder_.zero_grad();
}

Checkpoint VanillaVae::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.model_type = "vanilla_vae";
  ckpt.config = cfg_;
  ckpt.tensors = dump_params(const_cast<VanillaVae*>(this)->params());
  return ckpt;
}

}  // namespace isvae

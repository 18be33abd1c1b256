#include "isvae/training.hpp"

#include "isvae/clustering.hpp"
#include "isvae/metrics.hpp"
#include "isvae/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

namespace isvae::training {

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ValidationError("TrainConfig: learning_rate must be positive");
  if (stop_window != 0 && stop_window < 2)
    throw ValidationError("TrainConfig: stop_window must be 0 or >= 2");
  if (!(stop_tol > 0)) throw ValidationError("TrainConfig: stop_tol must be positive");
  if (log_every < 1) throw ValidationError("TrainConfig: log_every must be >= 1");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {
      {"epochs", cfg.epochs},         {"batch_size", cfg.batch_size},
      {"learning_rate", cfg.learning_rate}, {"seed", cfg.seed},
      {"stop_window", cfg.stop_window},     {"stop_tol", cfg.stop_tol},
      {"log_every", cfg.log_every},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.stop_window = j.value("stop_window", cfg.stop_window);
  cfg.stop_tol = j.value("stop_tol", cfg.stop_tol);
  cfg.log_every = j.value("log_every", cfg.log_every);
  return cfg;
}

void TrainingTrace::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw TrainingError("TrainingTrace::save_csv: cannot open " + path);
  const int j = records.empty() ? 0 : static_cast<int>(records.front().f0_mean.size());
  out << "epoch,elbo,recon,kl";
  for (int c = 0; c < j; ++c) out << ",f0_mean_" << c;
  if (has_val_vscore) out << ",val_vscore";
  out << "\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (const auto& r : records) {
    out << r.epoch << ',';
    put(r.elbo);
    out << ',';
    put(r.recon_loglik);
    out << ',';
    put(r.kl);
    for (int c = 0; c < j; ++c) {
      out << ',';
      put(r.f0_mean[c]);
    }
    if (has_val_vscore) {
      out << ',';
      put(r.val_vscore);
    }
    out << "\n";
  }
}

void TrainingTrace::save_class_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw TrainingError("TrainingTrace::save_class_csv: cannot open " + path);
  const int j = records.empty() ? 0 : static_cast<int>(records.front().f0_mean.size());
  out << "epoch,class";
  for (int c = 0; c < j; ++c) out << ",f0_mean_" << c;
  out << "\n";
  char buf[32];
  for (const auto& r : records) {
    for (int row = 0; row < r.f0_class_mean.rows(); ++row) {
      out << r.epoch << ',' << class_values[row];
      for (int c = 0; c < j; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.f0_class_mean(row, c));
        out << ',' << buf;
      }
      out << "\n";
    }
  }
}

bool should_stop(const TrainingTrace& trace, int window, double tol) {
  const int n = static_cast<int>(trace.records.size());
  if (window < 2 || n < window) return false;
  const int j = static_cast<int>(trace.records.back().f0_mean.size());
  if (j == 0) return false;
  for (int c = 0; c < j; ++c) {
    double lo = trace.records[n - window].f0_mean[c];
    double hi = lo;
    for (int e = n - window + 1; e < n; ++e) {
      lo = std::min(lo, trace.records[e].f0_mean[c]);
      hi = std::max(hi, trace.records[e].f0_mean[c]);
    }
    if (hi - lo >= tol) return false;
  }
  return true;
}

namespace {

Mat normal_matrix(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

std::vector<int> sorted_label_values(const Dataset& ds) {
  std::set<int> values(ds.labels->begin(), ds.labels->end());
  return {values.begin(), values.end()};
}

constexpr int kEvalBatch = 256;

// One frozen pass over the dataset: batch-weighted ELBO terms plus f0 means
// (overall and per class) when the model has a filter bank.
template <typename Model>
EpochRecord evaluate_epoch(Model& model, const Dataset& data, int epoch, Rng& eval_rng,
                           const std::vector<int>& class_values, bool with_f0) {
  const int n = data.n();
  const int k = model.config().k;
  const int j = model.config().j;
  EpochRecord rec;
  rec.epoch = epoch;

  double recon_sum = 0.0, kl_sum = 0.0;
  Vec f0_sum = Vec::Zero(with_f0 ? j : 0);
  Mat class_sum = Mat::Zero(with_f0 ? static_cast<int>(class_values.size()) : 0, with_f0 ? j : 0);
  std::vector<long> class_n(class_values.size(), 0);

  for (int start = 0; start < n; start += kEvalBatch) {
    const int rows = std::min(kEvalBatch, n - start);
    Mat x = data.signals.middleRows(start, rows);
    Mat noise = normal_matrix(eval_rng, rows, k);
    auto fr = model.forward(x, noise);
    const double d = static_cast<double>(x.cols());
    recon_sum += -(fr.mean_xhat - x).squaredNorm() / (2.0 * model.config().nu) -
                 rows * 0.5 * d * std::log(2.0 * M_PI * model.config().nu);
    kl_sum += 0.5 * (fr.post.mean.array().square() + fr.post.log_var.array().exp() - 1.0 -
                     fr.post.log_var.array())
                        .sum();
    if constexpr (std::is_same_v<Model, IsvaeModel>) {
      if (with_f0) {
        f0_sum += fr.fb.f0.colwise().sum().transpose();
        if (data.labeled()) {
          for (int r = 0; r < rows; ++r) {
            const int lab = (*data.labels)[start + r];
            const auto it = std::lower_bound(class_values.begin(), class_values.end(), lab);
            const int ci = static_cast<int>(it - class_values.begin());
            class_sum.row(ci) += fr.fb.f0.row(r);
            ++class_n[ci];
          }
        }
      }
    }
  }

  rec.recon_loglik = recon_sum / n;
  rec.kl = kl_sum / n;
  rec.elbo = rec.recon_loglik - rec.kl;
  if (with_f0) {
    rec.f0_mean = f0_sum / n;
    if (data.labeled() && !class_values.empty()) {
      rec.f0_class_mean = class_sum;
      for (size_t ci = 0; ci < class_n.size(); ++ci)
        if (class_n[ci] > 0) rec.f0_class_mean.row(ci) /= static_cast<double>(class_n[ci]);
    }
  }
  return rec;
}

double vscore_of(const Mat& features, const VecI& labels, std::uint64_t seed) {
  std::set<int> values(labels.begin(), labels.end());
  const int k = static_cast<int>(values.size());
  if (k < 1) return std::numeric_limits<double>::quiet_NaN();
  VecI pred = clustering::kmeans(features, std::min(k, static_cast<int>(features.rows())), seed).labels;
  return metrics::homogeneity_completeness_v(labels, pred).v;
}

template <typename Model>
TrainResult train_impl(Model& model, const TrainConfig& tc, const Dataset& train_set,
                       const Dataset* val_set, bool with_f0) {
  const int n = train_set.n();
  const int k = model.config().k;
  nn::Adam opt(tc.learning_rate);
  auto refs = model.params();

  TrainResult res;
  if (with_f0 && train_set.labeled()) res.trace.class_values = sorted_label_values(train_set);
  const bool score_val = val_set != nullptr && val_set->labeled();
  res.trace.has_val_vscore = score_val;

  Rng rng(tc.seed);
  double best_vscore = -1.0;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0, batch_id = 0; start < n; start += tc.batch_size, ++batch_id) {
      const int rows = std::min(tc.batch_size, n - start);
      Mat x(rows, train_set.dim());
      for (int r = 0; r < rows; ++r) x.row(r) = train_set.signals.row(order[start + r]);
      Mat noise = normal_matrix(rng, rows, k);
      auto stats = model.forward_backward(x, noise);
      if (!std::isfinite(stats.loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(batch_id));
      opt.step(refs);
      model.zero_grad();
    }

    Rng eval_rng(derive_seed(tc.seed, 1000u + static_cast<std::uint64_t>(epoch)));
    EpochRecord rec =
        evaluate_epoch(model, train_set, epoch, eval_rng, res.trace.class_values, with_f0);

    if (score_val) {
      Mat features;
      if constexpr (std::is_same_v<Model, IsvaeModel>) {
        features = model.filter_bank_forward(val_set->signals).f0;
      } else {
        GaussianPosterior post = model.encode(val_set->signals);
        Rng zrng(derive_seed(tc.seed, 3000u + static_cast<std::uint64_t>(epoch)));
        features = IsvaeModel::reparameterize(post, normal_matrix(zrng, val_set->n(), k));
      }
      rec.val_vscore = vscore_of(features, *val_set->labels,
                                 derive_seed(tc.seed, 2000u + static_cast<std::uint64_t>(epoch)));
      if (rec.val_vscore > best_vscore) {
        best_vscore = rec.val_vscore;
        res.best_checkpoint = model.to_checkpoint();
        res.best_epoch = epoch;
      }
    }

    res.trace.records.push_back(std::move(rec));
    res.stop_epoch = epoch;
    if (with_f0 && tc.stop_window > 0 && should_stop(res.trace, tc.stop_window, tc.stop_tol))
      break;
  }

  res.final_checkpoint = model.to_checkpoint();
  if (!score_val || res.best_epoch == 0) {
    res.best_checkpoint = res.final_checkpoint;
    res.best_epoch = 0;
  }
  return res;
}

void check_spectral_input(const ModelConfig& cfg, const Dataset& ds, const char* where) {
  ds.validate();
  if (ds.domain != Domain::spectrum)
    throw ValidationError(std::string(where) + ": dataset must be in the spectrum domain");
  if (ds.dim() != cfg.d)
    throw ValidationError(std::string(where) + ": dataset width does not match config D");
}

}  // namespace

Checkpoint initial_checkpoint(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  IsvaeModel model(cfg, rng);
  return model.to_checkpoint();
}

Checkpoint initial_vae_checkpoint(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  VanillaVae model(cfg, rng);
  return model.to_checkpoint();
}

TrainResult train(const ModelConfig& cfg, const TrainConfig& tc, const Dataset& train_set,
                  const Dataset* val_set) {
  tc.validate();
  check_spectral_input(cfg, train_set, "train");
  if (val_set) check_spectral_input(cfg, *val_set, "train(val)");

  Rng rng(tc.seed);
  IsvaeModel model(cfg, rng);
  if (cfg.decoder_kind == DecoderKind::attentive)
    model.set_periodogram(spectral::mean_periodogram(train_set.signals));
  return train_impl(model, tc, train_set, val_set, /*with_f0=*/true);
}

TrainResult train_vanilla_vae(const ModelConfig& cfg, const TrainConfig& tc,
                              const Dataset& train_set, const Dataset* val_set) {
  tc.validate();
  check_spectral_input(cfg, train_set, "train_vanilla_vae");
  if (val_set) check_spectral_input(cfg, *val_set, "train_vanilla_vae(val)");

  Rng rng(tc.seed);
  VanillaVae model(cfg, rng);
  return train_impl(model, tc, train_set, val_set, /*with_f0=*/false);
}

FeatureSet extract_features(const Checkpoint& ckpt, const Dataset& spectra, std::uint64_t seed,
                            bool z_mean) {
  if (ckpt.model_type != "isvae")
    throw ValidationError("extract_features: checkpoint is not an isvae model");
  check_spectral_input(ckpt.config, spectra, "extract_features");

  IsvaeModel model(ckpt);
  const int n = spectra.n();
  const int j = ckpt.config.j;
  const int k = ckpt.config.k;
  FeatureSet fs;
  fs.f0.resize(n, j);
  fs.z.resize(n, k);
  fs.extended.resize(n, 2 * j);

  Rng rng(derive_seed(seed, 11));
  for (int start = 0; start < n; start += kEvalBatch) {
    const int rows = std::min(kEvalBatch, n - start);
    Mat x = spectra.signals.middleRows(start, rows);
    FilterBankOutput fb = model.filter_bank_forward(x);
    GaussianPosterior post = model.encode(fb.f0);
    fs.f0.middleRows(start, rows) = fb.f0;
    fs.z.middleRows(start, rows) =
        z_mean ? post.mean : IsvaeModel::reparameterize(post, normal_matrix(rng, rows, k));
    fs.extended.block(start, 0, rows, j) = fb.f0;
    for (int c = 0; c < j; ++c)
      fs.extended.block(start, j + c, rows, 1) = fb.filtered[c].rowwise().squaredNorm();
  }
  return fs;
}

Mat extract_vae_latent(const Checkpoint& ckpt, const Dataset& spectra, std::uint64_t seed,
                       bool z_mean) {
  if (ckpt.model_type != "vanilla_vae")
    throw ValidationError("extract_vae_latent: checkpoint is not a vanilla_vae model");
  check_spectral_input(ckpt.config, spectra, "extract_vae_latent");

  VanillaVae model(ckpt);
  const int n = spectra.n();
  const int k = ckpt.config.k;
  Mat z(n, k);
  Rng rng(derive_seed(seed, 11));
  for (int start = 0; start < n; start += kEvalBatch) {
    const int rows = std::min(kEvalBatch, n - start);
    GaussianPosterior post = model.encode(spectra.signals.middleRows(start, rows));
    z.middleRows(start, rows) =
        z_mean ? post.mean : IsvaeModel::reparameterize(post, normal_matrix(rng, rows, k));
  }
  return z;
}

}  // namespace isvae::training

#include "isvae/model.hpp"

#include "isvae/spectral.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>
#include <cstdio>

using namespace isvae;

namespace {

ModelConfig small_config(DecoderKind kind = DecoderKind::vanilla, int j = 2) {
  ModelConfig cfg;
  cfg.d = 32;
  cfg.j = j;
  cfg.sigma = 3.0;
  cfg.k = 2;
  cfg.decoder_kind = kind;
  cfg.attention_hidden = {12, 8};
  cfg.decoder_hidden = {16};
  return cfg;
}

void zero_params_with_prefix(IsvaeModel& model, const std::string& prefix) {
  for (auto& ref : model.params())
    if (ref.name.rfind(prefix, 0) == 0) std::fill(ref.value, ref.value + ref.size, 0.0);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("kl closed form: zero at the prior, 0.5 for a unit mean shift") {
  Vec zero = Vec::Zero(3);
  CHECK(kl_to_standard_normal(zero, zero) == doctest::Approx(0.0));
  Vec mean = Vec::Zero(3);
  mean[0] = 1.0;
  CHECK(kl_to_standard_normal(mean, zero) == doctest::Approx(0.5));
}

TEST_CASE("kl closed form matches a Monte-Carlo estimate") {
  Rng rng(101);
  Vec mean = oracle::random_vector(rng, 4);
  Vec log_var = oracle::random_vector(rng, 4, 0.5);
  const double exact = kl_to_standard_normal(mean, log_var);
  const double mc = oracle::mc_kl(mean, log_var, 1000000, rng);
  CHECK(std::abs(mc - exact) / std::abs(exact) < 0.01);
}

TEST_CASE("kl is nonnegative for random posteriors") {
  Rng rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    Vec mean = oracle::random_vector(rng, 5, 2.0);
    Vec log_var = oracle::random_vector(rng, 5, 1.5);
    CHECK(kl_to_standard_normal(mean, log_var) >= -1e-9);
  }
}

TEST_CASE("elbo analytic values and additivity") {
  Vec x(2), zero2 = Vec::Zero(2), zerok = Vec::Zero(1);
  x << 0.3, -0.7;
  ElboTerms t = elbo_terms(x, x, zerok, zerok, 1.0);
  CHECK(t.elbo == doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-12));

  Vec mean(1);
  mean << 1.0;  // kl = 0.5
  ElboTerms t2 = elbo_terms(x, x, mean, zerok, 1.0);
  CHECK(t.elbo - t2.elbo == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("elbo matches an independently coded formula") {
  Rng rng(107);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x = oracle::random_vector(rng, 8);
    Vec xhat = oracle::random_vector(rng, 8);
    Vec mean = oracle::random_vector(rng, 3);
    Vec log_var = oracle::random_vector(rng, 3);
    std::uniform_real_distribution<double> nu_dist(0.2, 3.0);
    const double nu = nu_dist(rng);

    double recon = 0.0;
    for (int i = 0; i < 8; ++i) recon -= (x[i] - xhat[i]) * (x[i] - xhat[i]) / (2.0 * nu);
    recon -= 0.5 * 8 * std::log(2.0 * M_PI * nu);
    double kl = 0.0;
    for (int i = 0; i < 3; ++i)
      kl += 0.5 * (mean[i] * mean[i] + std::exp(log_var[i]) - 1.0 - log_var[i]);

    ElboTerms t = elbo_terms(x, xhat, mean, log_var, nu);
    CHECK(t.elbo == doctest::Approx(recon - kl).epsilon(1e-10));
    CHECK(t.kl >= 0.0);
    CHECK(t.elbo <= t.recon_loglik);
  }
}

TEST_CASE("reparameterize: zero noise returns the mean, unit basis shifts by one std") {
  GaussianPosterior post;
  post.mean = Mat::Ones(1, 3) * 0.4;
  post.log_var = Mat::Zero(1, 3);
  CHECK((IsvaeModel::reparameterize(post, Mat::Zero(1, 3)) - post.mean).norm() == 0.0);

  Mat e1 = Mat::Zero(1, 3);
  e1(0, 0) = 1.0;
  Mat z = IsvaeModel::reparameterize(post, e1);
  CHECK(z(0, 0) == doctest::Approx(1.4));
  CHECK(z(0, 1) == doctest::Approx(0.4));
}

TEST_CASE("reparameterize sampling statistics match the posterior") {
  Rng rng(109);
  GaussianPosterior post;
  post.mean = Mat(1, 3);
  post.mean << 0.5, -1.0, 2.0;
  post.log_var = Mat(1, 3);
  post.log_var << 0.0, -1.0, 0.7;

  const int n = 100000;
  Mat noise = oracle::random_matrix(rng, n, 3);
  GaussianPosterior wide;
  wide.mean = post.mean.colwise().replicate(n);
  wide.log_var = post.log_var.colwise().replicate(n);
  Mat z = IsvaeModel::reparameterize(wide, noise);

  for (int c = 0; c < 3; ++c) {
    const double variance = std::exp(post.log_var(0, c));
    const double se_mean = std::sqrt(variance / n);
    CHECK(std::abs(z.col(c).mean() - post.mean(0, c)) < 3.0 * se_mean);
    const double sample_var = (z.col(c).array() - z.col(c).mean()).square().sum() / (n - 1);
    const double se_var = variance * std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(sample_var - variance) < 3.0 * se_var);
  }
}

TEST_CASE("filter bank: J=1 passes the input through untouched") {
  Rng rng(113);
  IsvaeModel model(small_config(DecoderKind::vanilla, 1), rng);
  Mat x = oracle::random_matrix(rng, 4, 32);
  FilterBankOutput fb = model.filter_bank_forward(x);
  REQUIRE(fb.residuals.size() == 1);
  CHECK((fb.residuals[0] - x).norm() == 0.0);
}

TEST_CASE("filter bank with frozen attention at f=0.5 matches the hand-rolled cascade") {
  Rng rng(127);
  IsvaeModel model(small_config(), rng);
  zero_params_with_prefix(model, "fb.");  // sigmoid(0) = 0.5 on every branch

  Mat x = oracle::random_matrix(rng, 3, 32);
  FilterBankOutput fb = model.filter_bank_forward(x);
  CHECK((fb.f0.array() == 0.5).all());

  Vec taps = spectral::gaussian_taps(0.5, 3.0, 32);
  for (int r = 0; r < 3; ++r) {
    Vec expect = x.row(r).transpose().cwiseProduct(Vec::Ones(32) - taps);
    CHECK((fb.residuals[1].row(r).transpose() - expect).norm() <= 1e-10);
  }
}

TEST_CASE("filter bank outputs stay in [0,1] over 1000 random inputs") {
  Rng rng(131);
  IsvaeModel model(small_config(), rng);
  Mat x = oracle::random_matrix(rng, 1000, 32, 5.0);
  FilterBankOutput fb = model.filter_bank_forward(x);
  CHECK(fb.f0.minCoeff() >= 0.0);
  CHECK(fb.f0.maxCoeff() <= 1.0);
}

TEST_CASE("residual telescoping holds exactly for any weights") {
  Rng rng(137);
  IsvaeModel model(small_config(DecoderKind::vanilla, 4), rng);
  Mat x = oracle::random_matrix(rng, 5, 32, 2.0);
  FilterBankOutput fb = model.filter_bank_forward(x);
  for (int j = 0; j + 1 < 4; ++j) {
    Mat expect = fb.residuals[j] - fb.filtered[j];
    CHECK((fb.residuals[j + 1] - expect).norm() == 0.0);
  }
}

TEST_CASE("encode: zero final layer maps everything to the standard posterior") {
  Rng rng(139);
  IsvaeModel model(small_config(), rng);
  zero_params_with_prefix(model, "enc.1");  // final encoder layer
  Mat f0 = Mat::Random(6, 2).cwiseAbs();
  GaussianPosterior post = model.encode(f0);
  CHECK(post.mean.isZero(0.0));
  CHECK(post.log_var.isZero(0.0));
  CHECK(post.mean.cols() == 2);
  CHECK(post.log_var.cols() == 2);
}

TEST_CASE("encoder mean gradient w.r.t. f0 matches finite differences") {
  Rng rng(149);
  IsvaeModel model(small_config(), rng);
  Mat f0(1, 2);
  f0 << 0.3, 0.8;

  for (int out_k = 0; out_k < 2; ++out_k) {
    model.encode(f0);
    Mat dmean = Mat::Zero(1, 2);
    dmean(0, out_k) = 1.0;
    Mat analytic = model.encode_backward(dmean, Mat::Zero(1, 2));

    const double h = 1e-5;
    for (int q = 0; q < 2; ++q) {
      Mat up = f0, down = f0;
      up(0, q) += h;
      down(0, q) -= h;
      const double fd =
          (model.encode(up).mean(0, out_k) - model.encode(down).mean(0, out_k)) / (2 * h);
      CHECK(analytic(0, q) == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("vanilla decoder: zero final layer emits zeros; shapes hold") {
  Rng rng(151);
  IsvaeModel model(small_config(), rng);
  zero_params_with_prefix(model, "dec.1");  // output layer of {16} hidden net
  Mat z = Mat::Random(4, 2);
  Mat xhat = model.decode_vanilla(z);
  CHECK(xhat.rows() == 4);
  CHECK(xhat.cols() == 32);
  CHECK(xhat.isZero(0.0));
}

TEST_CASE("vanilla decoder gradient w.r.t. z matches finite differences") {
  Rng rng(157);
  IsvaeModel model(small_config(), rng);
  Mat z(1, 2);
  z << 0.2, -1.1;
  const int probe_d = 17;

  model.decode_vanilla(z);
  Mat dxhat = Mat::Zero(1, 32);
  dxhat(0, probe_d) = 1.0;
  Mat analytic = model.decode_vanilla_backward(dxhat);

  const double h = 1e-5;
  for (int q = 0; q < 2; ++q) {
    Mat up = z, down = z;
    up(0, q) += h;
    down(0, q) -= h;
    const double fd =
        (model.decode_vanilla(up)(0, probe_d) - model.decode_vanilla(down)(0, probe_d)) / (2 * h);
    CHECK(analytic(0, q) == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("attentive decoder: zero periodogram kills the filtered reconstruction") {
  Rng rng(163);
  IsvaeModel model(small_config(DecoderKind::attentive), rng);
  Mat z = Mat::Random(3, 2);
  model.decode_attentive(z, Vec::Zero(32));
  CHECK(model.last_filtered_reconstruction().isZero(0.0));
}

TEST_CASE("attentive decoder: unit periodogram with f=0.5 reproduces the taps") {
  Rng rng(167);
  ModelConfig cfg = small_config(DecoderKind::attentive, 1);
  IsvaeModel model(cfg, rng);
  zero_params_with_prefix(model, "dec_f0.2");  // sigmoid(0) = 0.5
  Mat z = Mat::Random(1, 2);
  auto [xhat, f0hat] = model.decode_attentive(z, Vec::Ones(32));
  CHECK(f0hat(0, 0) == doctest::Approx(0.5));
  Vec taps = spectral::gaussian_taps(0.5, 3.0, 32);
  CHECK((model.last_filtered_reconstruction().row(0).transpose() - taps).norm() <= 1e-12);
}

TEST_CASE("attentive decoder with a fixed periodogram is deterministic in z") {
  Rng rng(169);
  IsvaeModel model(small_config(DecoderKind::attentive), rng);
  Vec p_x = Vec::LinSpaced(32, 0.05, 2.0);
  Mat z = Mat::Random(4, 2);
  auto [a, fa] = model.decode_attentive(z, p_x);
  auto [b, fb] = model.decode_attentive(z, p_x);
  CHECK((a - b).norm() == 0.0);
  CHECK((fa - fb).norm() == 0.0);
}

TEST_CASE("attentive decoder gradient w.r.t. z matches finite differences") {
  Rng rng(173);
  IsvaeModel model(small_config(DecoderKind::attentive), rng);
  Vec p_x = oracle::random_vector(rng, 32).cwiseAbs();
  model.set_periodogram(p_x);
  Mat z(1, 2);
  z << 0.4, -0.6;
  const int probe_d = 9;

  model.decode_attentive(z, p_x);
  Mat dxhat = Mat::Zero(1, 32);
  dxhat(0, probe_d) = 1.0;
  Mat analytic = model.decode_attentive_backward(dxhat, Mat());

  const double h = 1e-5;
  for (int q = 0; q < 2; ++q) {
    Mat up = z, down = z;
    up(0, q) += h;
    down(0, q) -= h;
    const double fd = (model.decode_attentive(up, p_x).first(0, probe_d) -
                       model.decode_attentive(down, p_x).first(0, probe_d)) /
                      (2 * h);
    CHECK(analytic(0, q) == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("full-model gradients pass finite-difference checks (both decoders)") {
  for (DecoderKind kind : {DecoderKind::vanilla, DecoderKind::attentive}) {
    CAPTURE(to_string(kind));
    Rng rng(179);
    IsvaeModel model(small_config(kind), rng);
    Mat x = oracle::random_matrix(rng, 3, 32, 2.0);
    if (kind == DecoderKind::attentive)
      model.set_periodogram(spectral::mean_periodogram(x));
    Mat noise = oracle::random_matrix(rng, 3, 2);

    auto loss = [&]() { return -model.evaluate(x, noise).elbo; };
    auto grads = [&]() {
      model.zero_grad();
      model.forward_backward(x, noise);
    };
    Rng pick(181);
    const double worst = oracle::fd_gradient_check(model.params(), loss, grads, 25, pick);
    CHECK(worst <= 1e-3);
  }
}

TEST_CASE("vanilla VAE shapes and gradients") {
  Rng rng(191);
  ModelConfig cfg = small_config();
  VanillaVae model(cfg, rng);
  Mat x = oracle::random_matrix(rng, 4, 32, 2.0);
  Mat noise = oracle::random_matrix(rng, 4, 2);
  auto fr = model.forward(x, noise);
  CHECK(fr.mean_xhat.cols() == 32);
  CHECK(fr.post.mean.cols() == 2);
  CHECK(fr.post.log_var.cols() == 2);

  auto loss = [&]() { return -model.evaluate(x, noise).elbo; };
  auto grads = [&]() {
    model.zero_grad();
    model.forward_backward(x, noise);
  };
  Rng pick(193);
  const double worst = oracle::fd_gradient_check(model.params(), loss, grads, 25, pick);
  CHECK(worst <= 1e-3);
}

TEST_CASE("checkpoint round-trips bit-exactly through disk") {
  Rng rng(197);
  IsvaeModel model(small_config(DecoderKind::attentive), rng);
  model.set_periodogram(Vec::LinSpaced(32, 0.1, 3.0));
  Checkpoint saved = model.to_checkpoint();
  const std::string path = "/tmp/isvae_test_ckpt.json";
  saved.save(path);
  Checkpoint loaded = Checkpoint::load(path);
  CHECK(saved == loaded);

  IsvaeModel rebuilt(loaded);
  CHECK(rebuilt.to_checkpoint() == saved);
  std::remove(path.c_str());
}

TEST_CASE("log-variance clamp keeps the posterior finite") {
  Rng rng(199);
  IsvaeModel model(small_config(), rng);
  for (auto& ref : model.params())
    if (ref.name.rfind("enc", 0) == 0)
      for (int i = 0; i < ref.size; ++i) ref.value[i] = 50.0;
  Mat f0 = Mat::Ones(2, 2) * 0.5;
  GaussianPosterior post = model.encode(f0);
  CHECK(post.log_var.maxCoeff() <= 10.0);
  CHECK(post.log_var.minCoeff() >= -10.0);
  Mat variances = post.log_var.array().exp().matrix();
  CHECK(all_finite(variances));
}

}  // TEST_SUITE

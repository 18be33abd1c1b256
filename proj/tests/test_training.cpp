#include "isvae/training.hpp"

#include "isvae/datagen.hpp"
#include "isvae/spectral.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <fstream>
#include <string>

using namespace isvae;
namespace tr = isvae::training;
namespace dg = isvae::datagen;

namespace {

// Small sinusoid-mixture set in the spectrum domain, fast enough for units.
Dataset small_spectra(int n = 96, int d = 64, std::uint64_t seed = 0) {
  dg::SyntheticSpec spec;
  spec.n_signals = n;
  spec.length_d = d;
  spec.sampling_freq = d;
  spec.cluster_freqs = {{5, 11}, {9, 21}, {15, 27}, {3, 25}};
  spec.noise_var = 0.05;
  spec.seed = seed;
  return dg::to_spectrum(dg::generate_synthetic(spec));
}

ModelConfig small_model(DecoderKind kind = DecoderKind::vanilla) {
  ModelConfig cfg;
  cfg.d = 64;
  cfg.j = 2;
  cfg.sigma = 2.0;
  cfg.k = 2;
  cfg.decoder_kind = kind;
  cfg.attention_hidden = {12, 8};
  cfg.decoder_hidden = {24};
  return cfg;
}

tr::TrainConfig quick_train(int epochs, std::uint64_t seed = 1) {
  tr::TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 32;
  tc.seed = seed;
  tc.stop_window = 0;
  return tc;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("zero epochs: empty trace, checkpoint equals initialization") {
  Dataset data = small_spectra();
  tr::TrainResult res = tr::train(small_model(), quick_train(0, 5), data);
  CHECK(res.trace.records.empty());
  CHECK(res.final_checkpoint == tr::initial_checkpoint(small_model(), 5));
}

TEST_CASE("same seed twice gives bit-identical traces and checkpoints") {
  Dataset data = small_spectra();
  auto run = [&]() { return tr::train(small_model(), quick_train(3, 7), data); };
  tr::TrainResult a = run();
  tr::TrainResult b = run();
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  for (size_t e = 0; e < a.trace.records.size(); ++e) {
    CHECK(a.trace.records[e].elbo == b.trace.records[e].elbo);
    CHECK(a.trace.records[e].kl == b.trace.records[e].kl);
    CHECK((a.trace.records[e].f0_mean - b.trace.records[e].f0_mean).norm() == 0.0);
  }
  CHECK(a.final_checkpoint == b.final_checkpoint);
}

TEST_CASE("loss decreases on the small synthetic set for most seeds") {
  Dataset data = small_spectra();
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    tr::TrainResult res = tr::train(small_model(), quick_train(10, seed), data);
    const auto& rec = res.trace.records;
    if (-rec.back().elbo < -rec.front().elbo) ++improved;
  }
  CHECK(improved >= 4);
}

TEST_CASE("kl stays nonnegative in every logged epoch") {
  Dataset data = small_spectra();
  tr::TrainResult res = tr::train(small_model(), quick_train(6, 3), data);
  for (const auto& rec : res.trace.records) CHECK(rec.kl >= -1e-9);
}

TEST_CASE("f0 trace means live in [0,1] and match a frozen recomputation") {
  Dataset data = small_spectra();
  tr::TrainResult res = tr::train(small_model(), quick_train(4, 11), data);
  for (const auto& rec : res.trace.records) {
    CHECK(rec.f0_mean.minCoeff() >= 0.0);
    CHECK(rec.f0_mean.maxCoeff() <= 1.0);
  }
  // final epoch's mean equals the mean of f0 under the final parameters
  IsvaeModel model(res.final_checkpoint);
  Mat f0 = model.filter_bank_forward(data.signals).f0;
  Vec expect = f0.colwise().mean().transpose();
  CHECK((res.trace.records.back().f0_mean - expect).norm() <= 1e-12);
}

TEST_CASE("should_stop detects a stable window and rejects a drifting one") {
  tr::TrainingTrace trace;
  auto push = [&](double a, double b) {
    tr::EpochRecord rec;
    rec.f0_mean = Vec(2);
    rec.f0_mean << a, b;
    trace.records.push_back(rec);
  };
  for (int e = 0; e < 10; ++e) push(0.4, 0.7);
  CHECK(tr::should_stop(trace, 5, 0.01));
  CHECK_FALSE(tr::should_stop(trace, 11, 0.01));  // shorter than the window

  trace.records.clear();
  for (int e = 0; e < 10; ++e) push(0.4 + 0.002 * e, 0.7);  // drifts 0.02 > 2*tol over W=10
  CHECK_FALSE(tr::should_stop(trace, 10, 0.01));
}

TEST_CASE("training halts once the f0 means stabilize") {
  Dataset data = small_spectra();
  tr::TrainConfig tc = quick_train(60, 13);
  tc.stop_window = 5;
  tc.stop_tol = 0.5;  // loose tolerance so the stop fires quickly
  tr::TrainResult res = tr::train(small_model(), tc, data);
  CHECK(res.stop_epoch < 60);
  CHECK(static_cast<int>(res.trace.records.size()) == res.stop_epoch);
}

TEST_CASE("validation V-score selects a best checkpoint") {
  dg::SyntheticSpec spec;
  spec.n_signals = 96;
  spec.length_d = 64;
  spec.sampling_freq = 64;
  spec.cluster_freqs = {{5, 11}, {9, 21}, {15, 27}, {3, 25}};
  spec.noise_var = 0.05;
  Dataset full = dg::generate_synthetic(spec);
  dg::Split parts = dg::split(full, dg::SplitSpec{0.75, 0.125, 0.125, 2});
  Dataset train_s = dg::to_spectrum(parts.train);
  Dataset val_s = dg::to_spectrum(parts.val);

  tr::TrainResult res = tr::train(small_model(), quick_train(5, 17), train_s, &val_s);
  CHECK(res.trace.has_val_vscore);
  REQUIRE(res.best_epoch >= 1);
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& rec : res.trace.records) {
    CHECK(std::isfinite(rec.val_vscore));
    if (rec.val_vscore > best) {
      best = rec.val_vscore;
      best_epoch = rec.epoch;
    }
  }
  CHECK(res.best_epoch == best_epoch);
}

TEST_CASE("non-finite loss aborts with epoch/batch diagnostics") {
  // Finite but astronomically large coefficients overflow the squared
  // reconstruction error on the first batch.
  Dataset data;
  data.signals = Mat::Constant(40, 64, 1e200);
  data.domain = Domain::spectrum;
  try {
    tr::train(small_model(), quick_train(2, 19), data);
    FAIL("training accepted an overflowing loss");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch 0") != std::string::npos);
  }
}

TEST_CASE("extract_features: layout, energies, and frozen parameters") {
  Dataset data = small_spectra();
  tr::TrainResult res = tr::train(small_model(), quick_train(3, 23), data);
  Checkpoint before = res.final_checkpoint;

  tr::FeatureSet fs = tr::extract_features(before, data, 99);
  CHECK(fs.f0.rows() == data.n());
  CHECK(fs.extended.cols() == 4);
  CHECK((fs.extended.leftCols(2) - fs.f0).norm() == 0.0);

  // energies match the per-signal, per-filter band energy
  IsvaeModel model(before);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 2; ++j) {
      auto filt = spectral::gaussian_filter(fs.f0(i, j), 2.0, 64);
      const double e = spectral::band_energy(data.signals.row(i).transpose(), filt);
      CHECK(fs.extended(i, 2 + j) == doctest::Approx(e).epsilon(1e-10));
    }
  }

  // zero spectrum rows give zero energies
  Dataset zero = data;
  zero.signals.setZero();
  tr::FeatureSet zfs = tr::extract_features(before, zero, 99);
  CHECK(zfs.extended.rightCols(2).isZero(0.0));

  // feature extraction must not touch parameters
  tr::FeatureSet again = tr::extract_features(before, data, 99);
  CHECK(before == res.final_checkpoint);
  CHECK((again.f0 - fs.f0).norm() == 0.0);
}

TEST_CASE("vanilla VAE baseline trains and its loss decreases") {
  Dataset data = small_spectra();
  ModelConfig cfg = small_model();
  tr::TrainResult res = tr::train_vanilla_vae(cfg, quick_train(10, 29), data);
  REQUIRE(res.trace.records.size() == 10);
  CHECK(-res.trace.records.back().elbo < -res.trace.records.front().elbo);
  Mat z = tr::extract_vae_latent(res.final_checkpoint, data, 1);
  CHECK(z.rows() == data.n());
  CHECK(z.cols() == 2);
}

TEST_CASE("trace csv layout") {
  Dataset data = small_spectra();
  tr::TrainResult res = tr::train(small_model(), quick_train(2, 31), data);
  const std::string path = "/tmp/isvae_test_trace.csv";
  res.trace.save_csv(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,elbo,recon,kl,f0_mean_0,f0_mean_1");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);

  const std::string cpath = "/tmp/isvae_test_trace_classes.csv";
  res.trace.save_class_csv(cpath);
  std::ifstream cin_(cpath);
  std::getline(cin_, header);
  CHECK(header == "epoch,class,f0_mean_0,f0_mean_1");
  rows = 0;
  while (std::getline(cin_, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2 * 4);  // epochs x classes
}

}  // TEST_SUITE

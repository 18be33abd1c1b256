#include "isvae/spectral.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>

using namespace isvae;
namespace sp = isvae::spectral;

TEST_SUITE("spectral") {

TEST_CASE("dct2 of the zero signal is zero") {
  Vec zero = Vec::Zero(8);
  CHECK(sp::dct2(zero).isZero(0.0));
}

TEST_CASE("dct2 of a constant signal concentrates in bin 0") {
  Vec ones = Vec::Ones(8);
  Vec x = sp::dct2(ones);
  CHECK(x[0] == doctest::Approx(8.0).epsilon(1e-12));
  for (int d = 1; d < 8; ++d) CHECK(std::abs(x[d]) < 1e-12);
}

TEST_CASE("dct2 matches the direct-summation oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Vec s = oracle::random_vector(rng, 16);
    Vec mine = sp::dct2(s);
    Vec ref = oracle::naive_dct2(s);
    CHECK((mine - ref).norm() <= 1e-10 * std::max(1.0, ref.norm()));
  }
}

TEST_CASE("dct2 is linear") {
  Rng rng(13);
  std::uniform_real_distribution<double> coeff(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vec s1 = oracle::random_vector(rng, 24);
    Vec s2 = oracle::random_vector(rng, 24);
    const double a = coeff(rng), b = coeff(rng);
    Vec combined = sp::dct2(a * s1 + b * s2);
    Vec separate = a * sp::dct2(s1) + b * sp::dct2(s2);
    CHECK((combined - separate).norm() <= 1e-10 * std::max(1.0, separate.norm()));
  }
}

TEST_CASE("dct2 rejects invalid input") {
  Vec bad(4);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN(), 0.0, 2.0;
  CHECK_THROWS_AS(sp::dct2(bad), ValidationError);
  CHECK_THROWS_AS(sp::dct2(Vec::Ones(1)), ValidationError);
}

TEST_CASE("dct2_rows equals per-row dct2") {
  Rng rng(19);
  Mat signals = oracle::random_matrix(rng, 5, 12);
  Mat rows = sp::dct2_rows(signals);
  for (int i = 0; i < 5; ++i)
    CHECK((rows.row(i).transpose() - sp::dct2(signals.row(i).transpose())).norm() < 1e-12);
}

TEST_CASE("gaussian_filter peak and one-sigma values") {
  auto f = sp::gaussian_filter(0.5, 15.0, 600);
  CHECK(f.taps[300] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f.taps[315] == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("gaussian_filter at center 0 decays monotonically") {
  auto f = sp::gaussian_filter(0.0, 6.0, 112);
  for (int d = 1; d < 112; ++d) CHECK(f.taps[d] <= f.taps[d - 1]);
}

TEST_CASE("gaussian_filter taps stay in (0,1] with the peak within one bin") {
  Rng rng(23);
  std::uniform_real_distribution<double> center(0.0, 1.0);
  std::uniform_real_distribution<double> width(0.5, 40.0);
  std::uniform_int_distribution<int> length(8, 600);
  for (int trial = 0; trial < 200; ++trial) {
    const double c = center(rng), s = width(rng);
    const int d = length(rng);
    auto f = sp::gaussian_filter(c, s, d);
    int argmax = 0;
    for (int i = 0; i < d; ++i) {
      CHECK(f.taps[i] > 0.0);
      CHECK(f.taps[i] <= 1.0);
      if (f.taps[i] > f.taps[argmax]) argmax = i;
    }
    const double peak = std::min(c * d, static_cast<double>(d - 1));
    CHECK(std::abs(argmax - peak) <= 1.0);
  }
}

TEST_CASE("gaussian_filter rejects sigma <= 0") {
  CHECK_THROWS_AS(sp::gaussian_filter(0.5, 0.0, 32), ValidationError);
  CHECK_THROWS_AS(sp::gaussian_filter(0.5, -1.0, 32), ValidationError);
}

TEST_CASE("apply_filter identity, zero, and direct product") {
  sp::GaussianFilter ones;
  ones.taps = Vec::Ones(4);
  Vec x(4);
  x << 3, -1, 2, 7;
  CHECK((sp::apply_filter(x, ones) - x).norm() == 0.0);
  CHECK(sp::apply_filter(Vec::Zero(4), ones).isZero(0.0));

  sp::GaussianFilter f;
  f.taps = Vec(4);
  f.taps << 1.0, 0.5, 0.25, 0.0;
  Vec expect(4);
  expect << 1.0, 0.5, 0.25, 0.0;
  CHECK((sp::apply_filter(Vec::Ones(4), f) - expect).norm() == 0.0);

  CHECK_THROWS_AS(sp::apply_filter(Vec::Ones(5), f), ValidationError);
}

TEST_CASE("band_energy basics and oracle") {
  sp::GaussianFilter all;
  all.taps = Vec::Ones(2);
  Vec x(2);
  x << 2, 0;
  CHECK(sp::band_energy(x, all) == doctest::Approx(4.0));
  CHECK(sp::band_energy(Vec::Zero(2), all) == 0.0);

  Rng rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    Vec s = oracle::random_vector(rng, 32);
    auto f = sp::gaussian_filter(0.3, 4.0, 32);
    const double ref = oracle::loop_band_energy(s, f.taps);
    CHECK(sp::band_energy(s, f) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("mean_periodogram values and permutation invariance") {
  Mat one(1, 2);
  one << 1, -2;
  Vec p = sp::mean_periodogram(one);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(4.0));

  Mat two(2, 2);
  two << 1, 0, 0, 1;
  p = sp::mean_periodogram(two);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));

  Rng rng(31);
  Mat spectra = oracle::random_matrix(rng, 100, 16);
  std::vector<Vec> as_list;
  for (int i = 0; i < spectra.rows(); ++i) as_list.push_back(spectra.row(i).transpose());
  Vec ref = oracle::loop_mean_periodogram(as_list);
  CHECK((sp::mean_periodogram(spectra) - ref).norm() <= 1e-12 * ref.norm());

  Mat shuffled = spectra;
  std::vector<int> perm(spectra.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 0; i < spectra.rows(); ++i) shuffled.row(i) = spectra.row(perm[i]);
  CHECK((sp::mean_periodogram(shuffled) - sp::mean_periodogram(spectra)).norm() < 1e-12);

  CHECK_THROWS_AS(sp::mean_periodogram(Mat(0, 4)), ValidationError);
}

}  // TEST_SUITE

#pragma once

#include "isvae/common.hpp"

namespace isvae::spectral {

// Unnormalized DCT-II basis: basis(d, n) = cos(pi/D * (n + 1/2) * d).
// The transform is spectrum = basis * signal; it is not orthonormal.
Mat dct_basis(int d);

// D-point DCT-II of a single signal. O(D^2) direct summation.
Vec dct2(const Vec& signal);

// Row-wise DCT-II of a signal matrix (one basis build, one GEMM).
Mat dct2_rows(const Mat& signals);

// Gaussian band filter over DCT bins. `center` is a normalized frequency in
// [0,1]; `sigma` is the bandwidth measured in frequency bins, so
// taps[k] = exp(-(k - center*D)^2 / (2 sigma^2)).
struct GaussianFilter {
  double center = 0.0;
  double sigma = 1.0;
  Vec taps;
  int size() const { return static_cast<int>(taps.size()); }
};

GaussianFilter gaussian_filter(double center, double sigma, int d);

// Taps only; shared by the filter construction and the model hot path.
Vec gaussian_taps(double center, double sigma, int d);

// Element-wise product h (.) x.
Vec apply_filter(const Vec& spectrum, const GaussianFilter& filter);

// ||h (.) x||_2^2.
double band_energy(const Vec& spectrum, const GaussianFilter& filter);

// Dataset-averaged periodogram: p[d] = mean_i spectra(i, d)^2.
Vec mean_periodogram(const Mat& spectra);

}  // namespace isvae::spectral

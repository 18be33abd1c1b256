#include "isvae/spectral.hpp"

#include <cmath>
#include <limits>

namespace isvae::spectral {

Mat dct_basis(int d) {
  if (d < 2) throw ValidationError("dct_basis: length must be >= 2");
  Mat basis(d, d);
  const double step = M_PI / static_cast<double>(d);
  for (int k = 0; k < d; ++k)
    for (int n = 0; n < d; ++n)
      basis(k, n) = std::cos(step * (n + 0.5) * k);
  return basis;
}

Vec dct2(const Vec& signal) {
  const int d = static_cast<int>(signal.size());
  if (d < 2) throw ValidationError("dct2: signal length must be >= 2");
  if (!all_finite(signal)) throw ValidationError("dct2: signal has non-finite samples");
  return dct_basis(d) * signal;
}

Mat dct2_rows(const Mat& signals) {
  const int d = static_cast<int>(signals.cols());
  if (signals.rows() < 1 || d < 2) throw ValidationError("dct2_rows: need a nonempty matrix with >= 2 columns");
  if (!all_finite(signals)) throw ValidationError("dct2_rows: non-finite samples");
  return signals * dct_basis(d).transpose();
}

Vec gaussian_taps(double center, double sigma, int d) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian_taps: sigma must be positive");
  if (center < 0.0 || center > 1.0) throw ValidationError("gaussian_taps: center must lie in [0,1]");
  if (d < 2) throw ValidationError("gaussian_taps: need at least 2 taps");
  Vec taps(d);
  const double peak = center * d;
  const double denom = 2.0 * sigma * sigma;
  for (int k = 0; k < d; ++k) {
    const double off = k - peak;
    // Floor at the smallest normal double so far-away taps stay strictly
    // positive instead of flushing to zero.
    taps[k] = std::max(std::exp(-off * off / denom), std::numeric_limits<double>::min());
  }
  return taps;
}

GaussianFilter gaussian_filter(double center, double sigma, int d) {
  GaussianFilter f;
  f.center = center;
  f.sigma = sigma;
  f.taps = gaussian_taps(center, sigma, d);
  return f;
}

Vec apply_filter(const Vec& spectrum, const GaussianFilter& filter) {
  if (spectrum.size() != filter.taps.size())
    throw ValidationError("apply_filter: spectrum/filter length mismatch");
  return spectrum.cwiseProduct(filter.taps);
}

double band_energy(const Vec& spectrum, const GaussianFilter& filter) {
  if (spectrum.size() != filter.taps.size())
    throw ValidationError("band_energy: spectrum/filter length mismatch");
  return spectrum.cwiseProduct(filter.taps).squaredNorm();
}

Vec mean_periodogram(const Mat& spectra) {
  if (spectra.rows() < 1) throw ValidationError("mean_periodogram: empty input");
  if (!all_finite(spectra)) throw ValidationError("mean_periodogram: non-finite coefficients");
  return spectra.array().square().colwise().mean().transpose();
}

}  // namespace isvae::spectral

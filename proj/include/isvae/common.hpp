#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace isvae {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecI = Eigen::VectorXi;
using Rng = std::mt19937_64;

// Thrown when an input violates an operation's preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a run aborts mid-flight (non-finite loss, bad checkpoint, ...).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Mat& m) { return m.allFinite(); }
inline bool all_finite(const Vec& v) { return v.allFinite(); }

// Splitmix64 step; used to derive independent sub-seeds from one base seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace isvae

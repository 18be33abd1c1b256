#include "isvae/clustering.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

namespace isvae::clustering {

namespace {

void validate_features(const Mat& x) {
  if (x.rows() < 1) throw ValidationError("clustering: empty feature matrix");
  if (!all_finite(x)) throw ValidationError("clustering: non-finite features");
}

Mat kmeanspp_seed(const Mat& x, int k, Rng& rng) {
  const int n = static_cast<int>(x.rows());
  Mat centroids(k, x.cols());
  std::uniform_int_distribution<int> first(0, n - 1);
  centroids.row(0) = x.row(first(rng));

  Vec d2(n);
  for (int i = 0; i < n; ++i) d2[i] = (x.row(i) - centroids.row(0)).squaredNorm();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    int pick = 0;
    if (total > 0) {
      double r = unif(rng) * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);  // all points coincide with chosen centers
    }
    centroids.row(c) = x.row(pick);
    for (int i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (x.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

struct LloydRun {
  VecI labels;
  Mat centroids;
  double inertia = 0.0;
  std::vector<double> history;
};

LloydRun lloyd(const Mat& x, Mat centroids, int max_iter) {
  const int n = static_cast<int>(x.rows());
  const int k = static_cast<int>(centroids.rows());
  LloydRun run;
  run.labels = VecI::Constant(n, -1);

  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (x.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (x.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (run.labels[i] != best) changed = true;
      run.labels[i] = best;
      inertia += best_d;
    }
    run.history.push_back(inertia);
    run.inertia = inertia;
    if (!changed && iter > 0) break;

    Mat sums = Mat::Zero(k, x.cols());
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(run.labels[i]) += x.row(i);
      ++counts[run.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.row(c) = sums.row(c) / counts[c];
      } else {
        // Re-seat an empty centroid on the point farthest from its centroid.
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = (x.row(i) - centroids.row(run.labels[i])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centroids.row(c) = x.row(far);
      }
    }
  }
  run.centroids = std::move(centroids);
  return run;
}

}  // namespace

KmeansResult kmeans(const Mat& x, int k, std::uint64_t seed, int n_init, int max_iter) {
  validate_features(x);
  const int n = static_cast<int>(x.rows());
  if (k < 1) throw ValidationError("kmeans: k must be >= 1");
  if (k > n) throw ValidationError("kmeans: k exceeds the number of points");
  if (n_init < 1 || max_iter < 1) throw ValidationError("kmeans: n_init and max_iter must be >= 1");

  Rng rng(seed);
  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < n_init; ++attempt) {
    LloydRun run = lloyd(x, kmeanspp_seed(x, k, rng), max_iter);
    if (run.inertia < best.inertia) {
      best.labels = run.labels;
      best.centroids = run.centroids;
      best.inertia = run.inertia;
      best.inertia_history = run.history;
    }
  }
  return best;
}

VecI dbscan(const Mat& x, double eps, int min_pts) {
  validate_features(x);
  if (!(eps > 0)) throw ValidationError("dbscan: eps must be positive");
  if (min_pts < 1) throw ValidationError("dbscan: min_pts must be >= 1");

  const int n = static_cast<int>(x.rows());
  const double eps2 = eps * eps;
  std::vector<std::vector<int>> neighbors(n);
  for (int i = 0; i < n; ++i)
    for (int q = 0; q < n; ++q)
      if ((x.row(i) - x.row(q)).squaredNorm() <= eps2) neighbors[i].push_back(q);

  std::vector<bool> core(n, false);
  for (int i = 0; i < n; ++i) core[i] = static_cast<int>(neighbors[i].size()) >= min_pts;

  // Connected components over core points.
  VecI labels = VecI::Constant(n, -1);
  int next_cluster = 0;
  for (int i = 0; i < n; ++i) {
    if (!core[i] || labels[i] != -1) continue;
    const int cluster = next_cluster++;
    std::queue<int> frontier;
    frontier.push(i);
    labels[i] = cluster;
    while (!frontier.empty()) {
      const int p = frontier.front();
      frontier.pop();
      for (int q : neighbors[p]) {
        if (!core[q] || labels[q] != -1) continue;
        labels[q] = cluster;
        frontier.push(q);
      }
    }
  }

  // Border points attach to the nearest core point's cluster.
  for (int i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best = std::numeric_limits<double>::infinity();
    int owner = -1;
    for (int q : neighbors[i]) {
      if (!core[q]) continue;
      const double d = (x.row(i) - x.row(q)).squaredNorm();
      if (d < best) {
        best = d;
        owner = labels[q];
      }
    }
    labels[i] = owner;
  }
  return labels;
}

VecI spectral_cluster(const Mat& x, int k, std::uint64_t seed, double gamma) {
  validate_features(x);
  const int n = static_cast<int>(x.rows());
  if (k < 1) throw ValidationError("spectral_cluster: k must be >= 1");
  if (k > n) throw ValidationError("spectral_cluster: k exceeds the number of points");
  if (k == 1) return VecI::Zero(n);

  if (gamma <= 0) gamma = 1.0 / static_cast<double>(x.cols());
  Mat affinity(n, n);
  for (int i = 0; i < n; ++i) {
    affinity(i, i) = 1.0;
    for (int q = i + 1; q < n; ++q) {
      const double a = std::exp(-gamma * (x.row(i) - x.row(q)).squaredNorm());
      affinity(i, q) = a;
      affinity(q, i) = a;
    }
  }

  // Symmetric normalized Laplacian with epsilon-regularized degrees.
  Vec degree = affinity.rowwise().sum();
  Vec inv_sqrt = (degree.array() + 1e-12).rsqrt();
  Mat laplacian = Mat::Identity(n, n) -
                  (inv_sqrt.asDiagonal() * affinity * inv_sqrt.asDiagonal());

  Eigen::SelfAdjointEigenSolver<Mat> solver(laplacian);
  Mat embedding = solver.eigenvectors().leftCols(k);  // ascending eigenvalues
  for (int i = 0; i < n; ++i) {
    const double norm = embedding.row(i).norm();
    if (norm > 0) embedding.row(i) /= norm;
  }
  return kmeans(embedding, k, seed).labels;
}

}  // namespace isvae::clustering

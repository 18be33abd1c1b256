#pragma once

#include "isvae/common.hpp"

#include <vector>

namespace isvae::clustering {

struct KmeansResult {
  VecI labels;
  Mat centroids;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // one entry per Lloyd iteration of the winning restart
};

// Lloyd iterations from k-means++ seeding; best inertia over n_init restarts,
// ties broken by restart order. Deterministic given the seed.
KmeansResult kmeans(const Mat& features, int k, std::uint64_t seed, int n_init = 10,
                    int max_iter = 300);

// Density clustering with Euclidean distances; noise is labeled -1. Border
// points join the cluster of their nearest core point, which makes the
// partition independent of row order (up to label permutation).
VecI dbscan(const Mat& features, double eps, int min_pts);

// RBF affinity, symmetric normalized Laplacian, k smallest eigenvectors
// row-normalized, k-means on the embedding. gamma <= 0 selects 1/dim.
VecI spectral_cluster(const Mat& features, int k, std::uint64_t seed, double gamma = 0.0);

}  // namespace isvae::clustering

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vega/tensor.hpp"

namespace vega {

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Tensor vectors;              // [n x n], row i is the eigenvector of values[i]
  std::size_t sweeps = 0;
};

/// Cyclic Jacobi rotations on a symmetric [n x n] matrix. Each eigenvector is
/// sign-normalized so that its largest-magnitude entry is positive.
SymmetricEigen jacobi_eigen(const Tensor& symmetric);

struct PcaResult {
  Tensor components;                // [k x d], orthonormal rows
  std::vector<double> eigenvalues;  // k leading covariance eigenvalues, descending
  double total_variance = 0.0;      // sum of all d eigenvalues
  Tensor mean;                      // [d]
  Tensor projections;               // [N x k]
};

// Sample covariance (divides by N-1).
Tensor covariance(const Tensor& features);

/// Principal components of [N x d] features; 1 <= k <= min(N, d), N >= 2.
PcaResult pca(const Tensor& features, std::size_t k);

/// Three projection channels, each min-max scaled to [0, 1] independently and
/// laid out on the g x g patch grid (N = g*g). A channel with zero range maps to 0.5.
Tensor pca_to_rgb(const PcaResult& result);

struct Clustering {
  std::vector<int> labels;  // one per point, in [0, k)
  std::size_t k = 0;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each assignment step
  std::size_t iterations = 0;
};

/// k-means++ seeding from the project RNG, then Lloyd iterations until every
/// centroid moves less than 1e-9 or 300 iterations pass. Assignment ties go to
/// the lowest cluster id; an emptied cluster is re-seeded at the point farthest
/// from its centroid.
Clustering kmeans(const Tensor& features, std::size_t k, std::uint64_t seed);

/// Adjusted Rand Index from the contingency table. Returns 1 in the 0/0 case
/// (both partitions single-cluster, or both all-singletons).
double ari(std::span<const int> a, std::span<const int> b);
inline double ari(const Clustering& a, const Clustering& b) { return ari(a.labels, b.labels); }

// M[i][j] = ari(i, j); symmetric with unit diagonal.
Tensor pairwise_ari_matrix(std::span<const Clustering> clusterings);

}  // namespace vega

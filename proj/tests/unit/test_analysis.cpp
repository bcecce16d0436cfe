#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "vega/analysis.hpp"
#include "vega/error.hpp"
#include "vega/rng.hpp"

using namespace vega;
using vega::test::random_tensor;

namespace {

// Pairs counted one by one; no contingency table.
double ari_brute_force(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, only_a = 0, only_b = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      only_a += sa;
      only_b += sb;
      pairs += 1;
    }
  const double expected = only_a * only_b / pairs;
  const double max_index = 0.5 * (only_a + only_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

std::vector<int> random_labels(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<int> l(n);
  for (int& v : l) v = static_cast<int>(rng.below(k));
  return l;
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t.at(r, c);
  return m;
}

Tensor blobs(std::size_t per, std::uint64_t seed) {
  Rng rng(seed);
  const double centres[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  Tensor x({3 * per, 2});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      x[(c * per + i) * 2] = centres[c][0] + 0.3 * rng.normal();
      x[(c * per + i) * 2 + 1] = centres[c][1] + 0.3 * rng.normal();
    }
  return x;
}

}  // namespace

TEST(Jacobi, DiagonalizesAndReconstructs) {
  const Tensor a = random_tensor({6, 6}, 1);
  Tensor s({6, 6});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) s[i * 6 + j] = a.at(i, j) + a.at(j, i);
  const SymmetricEigen e = jacobi_eigen(s);
  EXPECT_TRUE(std::is_sorted(e.values.rbegin(), e.values.rend()));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double rec = 0;
      for (std::size_t k = 0; k < 6; ++k) rec += e.values[k] * e.vectors.at(k, i) * e.vectors.at(k, j);
      EXPECT_NEAR(rec, s.at(i, j), 1e-12);
    }
  for (std::size_t k = 0; k < 6; ++k) {
    double big = 0;
    for (std::size_t i = 0; i < 6; ++i)
      if (std::abs(e.vectors.at(k, i)) > std::abs(big)) big = e.vectors.at(k, i);
    EXPECT_GT(big, 0.0);
  }
  EXPECT_THROW(jacobi_eigen(random_tensor({2, 3}, 2)), ValidationError);
}

TEST(Pca, MatchesEigenOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor x = random_tensor({16, 8}, 100 + seed);
    const PcaResult r = pca(x, 8);
    const Eigen::MatrixXd m = to_eigen(x);
    const Eigen::MatrixXd centred = m.rowwise() - m.colwise().mean();
    const Eigen::MatrixXd cov = centred.transpose() * centred / 15.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(r.eigenvalues[k], solver.eigenvalues()(7 - k), 1e-10);
    EXPECT_NEAR(r.total_variance, cov.trace(), 1e-12);
    for (std::size_t k = 0; k < 8; ++k) {
      const Eigen::VectorXd v = solver.eigenvectors().col(7 - k);
      double dot = 0;
      for (std::size_t j = 0; j < 8; ++j) dot += v(j) * r.components.at(k, j);
      EXPECT_NEAR(std::abs(dot), 1.0, 1e-8);
    }
  }
}

TEST(Pca, OrthonormalComponentsAndProjections) {
  const Tensor x = random_tensor({20, 6}, 7);
  const PcaResult r = pca(x, 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      double dot = 0;
      for (std::size_t j = 0; j < 6; ++j) dot += r.components.at(a, j) * r.components.at(b, j);
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
    }
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double p = 0;
      for (std::size_t j = 0; j < 6; ++j) p += (x.at(i, j) - r.mean[j]) * r.components.at(k, j);
      EXPECT_NEAR(r.projections.at(i, k), p, 1e-12);
    }
}

TEST(Pca, LineDataHasOneComponent) {
  Tensor x({10, 3});
  for (std::size_t i = 0; i < 10; ++i) {
    const double t = static_cast<double>(i) - 4.5;
    x[i * 3] = t;
    x[i * 3 + 1] = 2 * t;
    x[i * 3 + 2] = -t;
  }
  const PcaResult r = pca(x, 3);
  EXPECT_NEAR(r.eigenvalues[0], r.total_variance, 1e-12);
  EXPECT_NEAR(r.eigenvalues[1], 0.0, 1e-12);
  const double s = std::sqrt(6.0);
  EXPECT_NEAR(r.components.at(0, 1), 2 / s, 1e-12);
}

TEST(Pca, IsotropicDataHasFlatSpectrum) {
  Rng rng(5);
  Tensor x({20000, 3});
  for (double& v : x.values()) v = rng.normal();
  const PcaResult r = pca(x, 3);
  for (double e : r.eigenvalues) EXPECT_NEAR(e, 1.0, 0.05);
}

TEST(Pca, RejectsBadRanks) {
  EXPECT_THROW(pca(random_tensor({1, 4}, 1), 1), ValidationError);
  EXPECT_THROW(pca(random_tensor({5, 4}, 1), 0), ValidationError);
  EXPECT_THROW(pca(random_tensor({5, 4}, 1), 5), ValidationError);
}

TEST(Pca, RgbScalingAndFlatChannel) {
  const PcaResult r = pca(random_tensor({16, 8}, 3), 3);
  const Tensor rgb = pca_to_rgb(r);
  ASSERT_EQ(rgb.shape(), (Shape{3, 4, 4}));
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double lo = 1, hi = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      lo = std::min(lo, rgb[ch * 16 + i]);
      hi = std::max(hi, rgb[ch * 16 + i]);
    }
    EXPECT_EQ(lo, 0.0);
    EXPECT_EQ(hi, 1.0);
  }
  PcaResult flat = r;
  for (std::size_t i = 0; i < 16; ++i) flat.projections[i * 3 + 2] = 0.25;
  const Tensor g = pca_to_rgb(flat);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(g[32 + i], 0.5);
  const PcaResult odd = pca(random_tensor({12, 8}, 3), 3);
  EXPECT_THROW(pca_to_rgb(odd), ValidationError);
}

TEST(Ari, MatchesBruteForcePairCounting) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(11), k = 1 + rng.below(4);
    const auto a = random_labels(rng, n, k), b = random_labels(rng, n, k);
    EXPECT_NEAR(ari(a, b), ari_brute_force(a, b), 1e-12);
  }
}

TEST(Ari, KnownCases) {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  const std::vector<int> relabelled{2, 2, 0, 0, 1, 1};
  EXPECT_NEAR(ari(a, relabelled), 1.0, 1e-15);
  const std::vector<int> one(6, 0);
  EXPECT_EQ(ari(one, one), 1.0);
  EXPECT_NEAR(ari(a, std::vector<int>{0, 1, 0, 1, 0, 1}), ari_brute_force(a, {0, 1, 0, 1, 0, 1}), 1e-15);
  EXPECT_THROW(ari(a, std::vector<int>{0, 1}), ValidationError);
}

TEST(Ari, IndependentLabelingsAverageNearZero) {
  double total = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    total += ari(random_labels(rng, 200, 5), random_labels(rng, 200, 5));
  }
  EXPECT_NEAR(total / 20, 0.0, 0.02);
}

TEST(Ari, PairwiseMatrixSymmetricUnitDiagonal) {
  std::vector<Clustering> cs;
  Rng rng(3);
  for (int i = 0; i < 4; ++i) {
    Clustering c;
    c.labels = random_labels(rng, 30, 3);
    c.k = 3;
    cs.push_back(c);
  }
  const Tensor m = pairwise_ari_matrix(cs);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(m.at(i, i), 1.0);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(m.at(i, j), m.at(j, i));
  }
}

TEST(Kmeans, RecoversSeparatedBlobs) {
  const Tensor x = blobs(20, 1);
  const Clustering c = kmeans(x, 3, 0);
  std::vector<int> truth(60);
  for (std::size_t i = 0; i < 60; ++i) truth[i] = static_cast<int>(i / 20);
  EXPECT_NEAR(ari(c.labels, truth), 1.0, 1e-12);
  for (std::size_t i = 1; i < c.inertia_history.size(); ++i)
    EXPECT_LE(c.inertia_history[i], c.inertia_history[i - 1] + 1e-12);
  EXPECT_DOUBLE_EQ(c.inertia, c.inertia_history.back());
}

TEST(Kmeans, DeterministicAndDegenerateK) {
  const Tensor x = random_tensor({25, 4}, 9);
  const Clustering a = kmeans(x, 4, 7), b = kmeans(x, 4, 7);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.inertia, b.inertia);
  const Clustering all = kmeans(x, 25, 1);
  EXPECT_NEAR(all.inertia, 0.0, 1e-20);
  std::vector<int> sorted = all.labels;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_THROW(kmeans(x, 0, 1), ValidationError);
  EXPECT_THROW(kmeans(x, 26, 1), ValidationError);
}

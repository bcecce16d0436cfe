#include "vega/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "vega/error.hpp"
#include "vega/rng.hpp"

namespace vega {

SymmetricEigen jacobi_eigen(const Tensor& symmetric) {
  if (symmetric.rank() != 2 || symmetric.dim(0) != symmetric.dim(1)) {
    throw ValidationError("jacobi_eigen: expected a square matrix, got " + shape_string(symmetric.shape()));
  }
  const std::size_t n = symmetric.dim(0);
  std::vector<double> a(symmetric.values().begin(), symmetric.values().end());
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  auto A = [&](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };

  SymmetricEigen out;
  for (std::size_t sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off == 0.0) break;
    ++out.sweeps;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        // Negligible next to both diagonal entries: drop it.
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(A(p, p)) + g == std::abs(A(p, p)) && std::abs(A(q, q)) + g == std::abs(A(q, q))) {
          A(p, q) = 0.0;
          A(q, p) = 0.0;
          continue;
        }
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = 0.0;
        A(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return A(i, i) > A(j, j); });
  out.values.resize(n);
  out.vectors = Tensor({n, n});
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t col = order[r];
    out.values[r] = A(col, col);
    std::size_t big = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (std::abs(v[k * n + col]) > std::abs(v[big * n + col])) big = k;
    const double sign = v[big * n + col] < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) out.vectors[r * n + k] = sign * v[k * n + col];
  }
  return out;
}

Tensor covariance(const Tensor& features) {
  if (features.rank() != 2 || features.dim(0) < 2) {
    throw ValidationError("covariance needs an [N x d] matrix with N >= 2");
  }
  const std::size_t n = features.dim(0), d = features.dim(1);
  std::vector<double> mu(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mu[j] += features[i * d + j];
  for (double& m : mu) m /= static_cast<double>(n);
  Tensor cov({d, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < d; ++p) {
      const double xp = features[i * d + p] - mu[p];
      for (std::size_t q = p; q < d; ++q) cov[p * d + q] += xp * (features[i * d + q] - mu[q]);
    }
  for (std::size_t p = 0; p < d; ++p)
    for (std::size_t q = p; q < d; ++q) {
      cov[p * d + q] /= static_cast<double>(n - 1);
      cov[q * d + p] = cov[p * d + q];
    }
  return cov;
}

PcaResult pca(const Tensor& features, std::size_t k) {
  if (features.rank() != 2 || features.dim(0) < 2) {
    throw ValidationError("pca needs an [N x d] matrix with N >= 2, got " + shape_string(features.shape()));
  }
  const std::size_t n = features.dim(0), d = features.dim(1);
  if (k == 0 || k > std::min(n, d)) {
    throw ValidationError("pca: k=" + std::to_string(k) + " outside [1, " + std::to_string(std::min(n, d)) + "]");
  }
  const SymmetricEigen eig = jacobi_eigen(covariance(features));

  PcaResult r;
  r.mean = Tensor({d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) r.mean[j] += features[i * d + j];
  for (std::size_t j = 0; j < d; ++j) r.mean[j] /= static_cast<double>(n);
  r.total_variance = std::accumulate(eig.values.begin(), eig.values.end(), 0.0);
  r.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(k));
  r.components = Tensor({k, d});
  std::copy(eig.vectors.values().begin(), eig.vectors.values().begin() + static_cast<std::ptrdiff_t>(k * d),
            r.components.values().begin());
  r.projections = Tensor({n, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (features[i * d + j] - r.mean[j]) * r.components[c * d + j];
      r.projections[i * k + c] = s;
    }
  return r;
}

Tensor pca_to_rgb(const PcaResult& result) {
  if (result.projections.rank() != 2 || result.projections.dim(1) != 3) {
    throw ValidationError("pca_to_rgb needs exactly 3 components");
  }
  const std::size_t n = result.projections.dim(0);
  const auto g = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (g * g != n) throw ValidationError("pca_to_rgb: " + std::to_string(n) + " patches do not form a square grid");
  Tensor image({3, g, g});
  for (std::size_t c = 0; c < 3; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, result.projections[i * 3 + c]);
      hi = std::max(hi, result.projections[i * 3 + c]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      image[c * n + i] = hi > lo ? (result.projections[i * 3 + c] - lo) / (hi - lo) : 0.5;
    }
  }
  return image;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

}  // namespace

Clustering kmeans(const Tensor& features, std::size_t k, std::uint64_t seed) {
  if (features.rank() != 2) throw ValidationError("kmeans expects an [N x d] matrix");
  const std::size_t n = features.dim(0), d = features.dim(1);
  if (k == 0 || k > n) {
    throw ValidationError("kmeans: k=" + std::to_string(k) + " must lie in [1, N=" + std::to_string(n) + "]");
  }
  const double* x = features.values().data();
  Rng rng(derive_seed(seed, 31));

  // k-means++ seeding.
  std::vector<double> centroids(k * d);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.below(n);
  std::copy(x + first * d, x + (first + 1) * d, centroids.begin());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq_dist(x + i * d, centroids.data() + (c - 1) * d, d));
      total += best[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    std::copy(x + pick * d, x + (pick + 1) * d, centroids.begin() + c * d);
  }

  Clustering out;
  out.k = k;
  out.labels.assign(n, 0);
  std::vector<double> dist(n);
  std::vector<double> next(k * d);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < 300; ++it) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int arg = 0;
      double bd = sq_dist(x + i * d, centroids.data(), d);
      for (std::size_t c = 1; c < k; ++c) {
        const double dd = sq_dist(x + i * d, centroids.data() + c * d, d);
        if (dd < bd) {
          bd = dd;
          arg = static_cast<int>(c);
        }
      }
      out.labels[i] = arg;
      dist[i] = bd;
      inertia += bd;
    }
    out.inertia = inertia;
    out.inertia_history.push_back(inertia);
    out.iterations = it + 1;

    std::fill(next.begin(), next.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(out.labels[i]);
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) next[c * d + j] += x[i * d + j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (dist[i] > dist[far]) far = i;
        std::copy(x + far * d, x + (far + 1) * d, next.begin() + c * d);
        dist[far] = 0.0;
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) next[c * d + j] /= static_cast<double>(counts[c]);
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) moved = std::max(moved, std::sqrt(sq_dist(next.data() + c * d, centroids.data() + c * d, d)));
    centroids.swap(next);
    if (moved < 1e-9) break;
  }
  return out;
}

double ari(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw ValidationError("ari: labelings have different lengths (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  const std::size_t n = a.size();
  std::map<int, std::size_t> ia, ib;
  for (int l : a) ia.emplace(l, ia.size());
  for (int l : b) ib.emplace(l, ib.size());
  std::vector<double> table(ia.size() * ib.size(), 0.0), ra(ia.size(), 0.0), rb(ib.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = ia[a[i]], c = ib[b[i]];
    table[r * ib.size() + c] += 1.0;
    ra[r] += 1.0;
    rb[c] += 1.0;
  }
  auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (double v : table) sum_ij += pairs(v);
  for (double v : ra) sum_a += pairs(v);
  for (double v : rb) sum_b += pairs(v);
  const double total = pairs(static_cast<double>(n));
  if (total == 0.0) return 1.0;
  const double expected = sum_a * sum_b / total;
  const double denom = 0.5 * (sum_a + sum_b) - expected;
  if (denom == 0.0) return 1.0;
  return (sum_ij - expected) / denom;
}

Tensor pairwise_ari_matrix(std::span<const Clustering> clusterings) {
  if (clusterings.empty()) throw ValidationError("pairwise_ari_matrix: no clusterings");
  const std::size_t m = clusterings.size();
  Tensor out({m, m});
  for (std::size_t i = 0; i < m; ++i) {
    out[i * m + i] = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      const double v = ari(clusterings[i], clusterings[j]);
      out[i * m + j] = v;
      out[j * m + i] = v;
    }
  }
  return out;
}

}  // namespace vega

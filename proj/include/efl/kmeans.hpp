#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

#include "efl/error.hpp"
#include "efl/matrix.hpp"
#include "efl/rng.hpp"

namespace efl {

struct KMeansResult {
  std::vector<std::size_t> assignments;
  Matrix centroids;  // c x dim
  double inertia = 0.0;
};

struct KMeansOptions {
  std::size_t restarts = 20;
  std::size_t max_iterations = 100;
};

namespace detail {

// Nearest centroid; ties go to the lowest index.
inline std::size_t nearest_centroid(std::span<const double> p, const Matrix& centroids,
                                    double* dist_out = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(p, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline Matrix kmeanspp_seed(const Matrix& points, std::size_t c, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centroids(c, points.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = uniform_index(rng, n);
  std::copy_n(points.row(first).begin(), points.cols(), centroids.row(0).begin());
  for (std::size_t k = 1; k < c; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(k - 1)));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
    } else {
      pick = uniform_index(rng, n);
    }
    std::copy_n(points.row(pick).begin(), points.cols(), centroids.row(k).begin());
  }
  return centroids;
}

inline void recompute_centroids(const Matrix& points, const std::vector<std::size_t>& assign,
                                Matrix& centroids, std::vector<std::size_t>& counts) {
  const std::size_t c = centroids.rows();
  Matrix sums(c, points.cols());
  counts.assign(c, 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    auto dst = sums.row(assign[i]);
    auto src = points.row(i);
    for (std::size_t j = 0; j < points.cols(); ++j) dst[j] += src[j];
    ++counts[assign[i]];
  }
  for (std::size_t k = 0; k < c; ++k) {
    if (counts[k] == 0) continue;
    auto dst = centroids.row(k);
    auto s = sums.row(k);
    for (std::size_t j = 0; j < points.cols(); ++j) dst[j] = s[j] / static_cast<double>(counts[k]);
  }
}

// Moves the point farthest from its centroid (taken from a cluster with at
// least two members) into each empty cluster as a singleton.
inline void repair_empty_clusters(const Matrix& points, std::vector<std::size_t>& assign,
                                  Matrix& centroids, std::vector<std::size_t>& counts) {
  for (std::size_t empty = 0; empty < centroids.rows(); ++empty) {
    if (counts[empty] != 0) continue;
    std::size_t donor = points.rows();
    double far = -1.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
      if (counts[assign[i]] < 2) continue;
      const double d = squared_distance(points.row(i), centroids.row(assign[i]));
      if (d > far) {
        far = d;
        donor = i;
      }
    }
    if (donor == points.rows()) break;  // fewer points than clusters; excluded by precondition
    --counts[assign[donor]];
    assign[donor] = empty;
    counts[empty] = 1;
    recompute_centroids(points, assign, centroids, counts);
  }
}

inline double inertia_of(const Matrix& points, const std::vector<std::size_t>& assign,
                         const Matrix& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i)
    s += squared_distance(points.row(i), centroids.row(assign[i]));
  return s;
}

inline KMeansResult lloyd(const Matrix& points, Matrix centroids, std::size_t max_iterations) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> assign(n, centroids.rows());
  std::vector<std::size_t> counts;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = nearest_centroid(points.row(i), centroids);
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    if (!changed) break;
    recompute_centroids(points, assign, centroids, counts);
    repair_empty_clusters(points, assign, centroids, counts);
  }
  double inertia = inertia_of(points, assign, centroids);
  return {std::move(assign), std::move(centroids), inertia};
}

}  // namespace detail

// Lloyd's k-means with k-means++ seeding. Returns the lowest-inertia result
// over `restarts` seedings; the first restart wins ties.
inline KMeansResult kmeans(const Matrix& points, std::size_t c, Rng& rng,
                           const KMeansOptions& opts = {}) {
  detail::require(c >= 1, "kmeans: c must be >= 1");
  detail::require(c <= points.rows(), "kmeans: c=", c, " exceeds point count ", points.rows());
  detail::require(opts.restarts >= 1, "kmeans: restarts must be >= 1");
  detail::require(points.all_finite(), "kmeans: non-finite point");

  KMeansResult best;
  bool have = false;
  for (std::size_t r = 0; r < opts.restarts; ++r) {
    Matrix init = detail::kmeanspp_seed(points, c, rng);
    KMeansResult res = detail::lloyd(points, std::move(init), opts.max_iterations);
    if (!have || res.inertia < best.inertia) {
      best = std::move(res);
      have = true;
    }
  }
  return best;
}

}  // namespace efl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "efl/eigen.hpp"
#include "efl/error.hpp"
#include "efl/kmeans.hpp"
#include "efl/matrix.hpp"
#include "efl/rng.hpp"

namespace efl {

// Cohort participants' activation vectors stacked row-wise; row i belongs to
// client participants[i].
struct ActivationMatrix {
  Matrix rows;
  std::vector<std::size_t> participants;
};

struct ClusterAssignment {
  std::vector<std::size_t> labels;         // per participant, in [0, C)
  std::vector<std::size_t> cluster_sizes;  // |gamma_q|
  std::vector<double> weights;             // per participant
};

// S = A A^T, or the cosine-similarity matrix when `normalize` is set.
inline Matrix similarity(const Matrix& a, bool normalize = false) {
  detail::require(a.rows() > 0, "similarity: empty activation matrix");
  Matrix src = a;
  if (normalize) {
    for (std::size_t i = 0; i < src.rows(); ++i) {
      auto r = src.row(i);
      const double norm = std::sqrt(dot(r, r));
      if (norm == 0.0)
        throw DegenerateRowError(detail::concat("similarity: row ", i, " is all zeros"), i);
      for (double& v : r) v /= norm;
    }
  }
  const std::size_t n = src.rows();
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(src.row(i), src.row(j));
      s(i, j) = v;
      s(j, i) = v;
    }
    if (normalize) s(i, i) = 1.0;
  }
  return s;
}

inline Matrix similarity(const ActivationMatrix& a, bool normalize = false) {
  detail::require(a.participants.empty() || a.participants.size() == a.rows.rows(),
                  "similarity: ", a.participants.size(), " participant ids for ", a.rows.rows(),
                  " rows");
  return similarity(a.rows, normalize);
}

// Row i of the returned r x c matrix embeds participant i: entries of the
// top-c eigenvectors of S, each eigenvector signed so its largest-magnitude
// entry is positive (first such entry on ties).
inline Matrix spectral_embedding(const Matrix& s, std::size_t c) {
  detail::require(c >= 1 && c <= s.rows(), "spectral_embedding: c=", c, " outside [1, ",
                  s.rows(), "]");
  const EigenResult eig = jacobi_eigh(s);
  Matrix emb(s.rows(), c);
  for (std::size_t j = 0; j < c; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < s.rows(); ++i)
      if (std::abs(eig.eigenvectors(i, j)) > std::abs(eig.eigenvectors(arg, j))) arg = i;
    const double sign = eig.eigenvectors(arg, j) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < s.rows(); ++i) emb(i, j) = sign * eig.eigenvectors(i, j);
  }
  return emb;
}

// Spectral clustering of the participants behind S into c groups: k-means
// on the top-c eigenvector rows. Only `labels` and `cluster_sizes` are set.
inline ClusterAssignment spectral_cluster(const Matrix& s, std::size_t c, Rng& rng,
                                          const KMeansOptions& opts = {}) {
  detail::require(s.rows() == s.cols(), "spectral_cluster: S must be square");
  detail::require(c >= 1 && c <= s.rows(), "spectral_cluster: c=", c, " outside [1, ", s.rows(),
                  "]");
  ClusterAssignment out;
  if (c == 1) {
    out.labels.assign(s.rows(), 0);
  } else {
    const Matrix emb = spectral_embedding(s, c);
    out.labels = kmeans(emb, c, rng, opts).assignments;
  }
  out.cluster_sizes.assign(c, 0);
  for (std::size_t l : out.labels) ++out.cluster_sizes[l];
  return out;
}

// Equitable aggregation weights: participant i in cluster q gets
// 1 / (c * |gamma_q|), so each cluster carries total mass 1/c.
inline ClusterAssignment equitable_weights(std::span<const std::size_t> labels, std::size_t c) {
  detail::require(c >= 1, "equitable_weights: c must be >= 1");
  ClusterAssignment out;
  out.labels.assign(labels.begin(), labels.end());
  out.cluster_sizes.assign(c, 0);
  for (std::size_t l : labels) {
    detail::require(l < c, "equitable_weights: label ", l, " outside [0, ", c, ")");
    ++out.cluster_sizes[l];
  }
  for (std::size_t q = 0; q < c; ++q)
    detail::require(out.cluster_sizes[q] >= 1, "equitable_weights: cluster ", q, " is empty");
  out.weights.reserve(labels.size());
  for (std::size_t l : labels)
    out.weights.push_back(1.0 / (static_cast<double>(c) *
                                 static_cast<double>(out.cluster_sizes[l])));
  return out;
}

// The full server-side step: similarity, spectral clustering, weights.
inline ClusterAssignment cluster_and_weigh(const ActivationMatrix& a, std::size_t c, Rng& rng,
                                           bool normalize = false,
                                           const KMeansOptions& opts = {}) {
  const Matrix s = similarity(a, normalize);
  const ClusterAssignment labels = spectral_cluster(s, c, rng, opts);
  return equitable_weights(labels.labels, c);
}

}  // namespace efl

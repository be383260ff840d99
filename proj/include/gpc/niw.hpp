#pragma once

#include <cstddef>
#include <span>

#include "gpc/types.hpp"

namespace gpc {

/// Normal-Inverse-Wishart prior theta = (m, kappa, Psi, nu). The inverse
/// Wishart scale matrix is nu * Psi.
struct NiwHyper {
  Vector m;
  double kappa = 1.0;
  Matrix psi;
  double nu = 0.0;

  Eigen::Index dim() const { return m.size(); }
  /// Throws Domain / NotSPD / DimMismatch when an invariant is broken.
  void validate() const;
};

/// Sufficient statistics of a point set. Stored as (n, mean, centred scatter)
/// so that far-from-origin clusters do not lose precision; sum() and sumsq()
/// reconstruct the raw moments.
class SuffStats {
 public:
  SuffStats() = default;
  explicit SuffStats(Eigen::Index dim);

  void add(const Vector& z);
  SuffStats& operator+=(const SuffStats& other);

  std::size_t n() const { return n_; }
  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  /// Sum of (z - mean)(z - mean)^T.
  const Matrix& scatter() const { return scatter_; }
  Vector sum() const;
  Matrix sumsq() const;

 private:
  std::size_t n_ = 0;
  Vector mean_;
  Matrix scatter_;
};

SuffStats operator+(SuffStats a, const SuffStats& b);

/// Statistics of all rows of `points`.
SuffStats accumulate(const Matrix& points);
/// Statistics of the selected rows of `points`.
SuffStats accumulate(const Matrix& points, std::span<const std::size_t> rows);

struct NiwPosterior {
  double kappa_star = 0.0;
  Vector m_star;
  double nu_star = 0.0;
  Matrix psi_star;  // carries the 1/nu_star factor

  /// nu* Psi*, the effective inverse-Wishart scale.
  Matrix scale() const { return nu_star * psi_star; }
  /// Reinterprets the posterior as a prior for a further update.
  NiwHyper as_prior() const { return {m_star, kappa_star, psi_star, nu_star}; }
};

/// Data-scaled weakly informative prior: m = mean, kappa = 1, nu = d + 2 and
/// nu * Psi = empirical covariance + 1e-6 tr/d I.
NiwHyper default_hyper(const Matrix& x);

/// Conjugate update. Throws NotSPD when nu* Psi* is not positive definite.
NiwPosterior posterior(const NiwHyper& prior, const SuffStats& stats);

/// ln h(Z; theta), the NIW marginal likelihood of the points summarised by
/// `stats`. A singular posterior scale gets one ridge of 1e-8 tr/d I before
/// the failure is reported.
double log_marginal(const NiwHyper& prior, const SuffStats& stats);

}  // namespace gpc

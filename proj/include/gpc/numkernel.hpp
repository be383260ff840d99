#pragma once

#include <cstddef>

#include "gpc/types.hpp"

namespace gpc {

/// Relative tolerance used when checking symmetry of supposedly SPD input.
inline constexpr double kSymmetryTolerance = 1e-10;

/// Returns (A + A^T) / 2. Throws DimMismatch for non-square input and NotSPD
/// when the asymmetry exceeds kSymmetryTolerance relative to max|A|.
Matrix symmetrized(const Matrix& a);

/// Cholesky factor of an SPD matrix. Construction symmetrizes the input and
/// throws ErrorKind::NotSPD on a non-positive pivot.
class Cholesky {
 public:
  explicit Cholesky(const Matrix& a);

  Eigen::Index dim() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }

  /// ln det(A) = 2 * sum ln L_kk.
  double logdet() const;
  /// Solves L y = b (forward substitution only).
  Vector solve_lower(const Vector& b) const;
  /// Solves A x = b.
  Vector solve(const Vector& b) const;

 private:
  Matrix lower_;
};

double cholesky_logdet(const Matrix& a);

/// ln Gamma_d(a) = d(d-1)/4 ln pi + sum_{j=1..d} ln Gamma(a + (1-j)/2).
/// Throws ErrorKind::Domain unless a > (d-1)/2.
double log_mvgamma(int d, double a);

/// Log density of N(z | mu, sigma).
double mvn_logpdf(const Vector& z, const Vector& mu, const Matrix& sigma);

/// Principal directions of a mean-centred data matrix (rows = samples).
struct PcaProjection {
  Matrix basis;            // input_dim x q, orthonormal columns
  Vector singular_values;  // q, non-increasing
  Vector mean;             // input_dim
  std::size_t samples = 0;
  double total_variance = 0.0;  // trace of the sample covariance
  bool rank_deficient = false;  // fewer than the requested q directions exist

  Eigen::Index input_dim() const { return basis.rows(); }
  Eigen::Index output_dim() const { return basis.cols(); }

  /// Sample variance along direction j: S_j^2 / (samples - 1).
  double explained_variance(Eigen::Index j) const;
  /// Fraction of total variance captured by the first `count` directions.
  double explained_ratio(Eigen::Index count) const;
};

/// Fits a q-direction PCA through the eigendecomposition of the sample
/// covariance. When the data has rank < q the projection holds only the
/// non-degenerate directions and `rank_deficient` is set.
PcaProjection fit_pca(const Matrix& x, Eigen::Index q);

/// v = V^T (z - mean).
Vector project(const PcaProjection& pca, const Vector& z);
/// Row-wise projection of a data matrix.
Matrix project_rows(const PcaProjection& pca, const Matrix& x);
/// Identity projection (no centring, identity basis) for dimension d.
PcaProjection identity_projection(Eigen::Index d);

/// Sample covariance (divisor n - 1; zero for a single row) of the given rows.
Matrix sample_covariance(const Matrix& x);

/// Adds `scale * tr(A)/d * I`; a zero-trace matrix receives `scale * I`.
Matrix add_ridge(const Matrix& a, double scale);

}  // namespace gpc

#include "gpc/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gpc/error.hpp"

namespace gpc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotSPD: return "NotSPD";
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::Rank: return "RankError";
    case ErrorKind::InfeasibleK: return "InfeasibleK";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::OwnerOutOfRange: return "OwnerOutOfRange";
    case ErrorKind::TooFewClasses: return "TooFewClasses";
    case ErrorKind::OverlapTooLarge: return "OverlapTooLarge";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Error";
}

Matrix symmetrized(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::DimMismatch, "matrix is not square");
  }
  if (a.size() == 0) return a;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= kSymmetryTolerance * scale)) {
    std::ostringstream msg;
    msg << "matrix is not symmetric (max asymmetry " << asym << ")";
    throw Error(ErrorKind::NotSPD, msg.str());
  }
  return 0.5 * (a + a.transpose());
}

Cholesky::Cholesky(const Matrix& a) {
  const Matrix s = symmetrized(a);
  const Eigen::Index d = s.rows();
  lower_ = Matrix::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double pivot = s(j, j) - lower_.row(j).head(j).squaredNorm();
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      std::ostringstream msg;
      msg << "Cholesky pivot " << j << " is " << pivot << " (matrix not SPD)";
      throw Error(ErrorKind::NotSPD, msg.str());
    }
    const double ljj = std::sqrt(pivot);
    lower_(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < d; ++i) {
      lower_(i, j) = (s(i, j) - lower_.row(i).head(j).dot(lower_.row(j).head(j))) / ljj;
    }
  }
}

double Cholesky::logdet() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

Vector Cholesky::solve_lower(const Vector& b) const {
  if (b.size() != dim()) throw Error(ErrorKind::DimMismatch, "rhs size mismatch");
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

Vector Cholesky::solve(const Vector& b) const {
  const Vector y = solve_lower(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

double cholesky_logdet(const Matrix& a) { return Cholesky(a).logdet(); }

double log_mvgamma(int d, double a) {
  if (d < 1) throw Error(ErrorKind::Domain, "log_mvgamma: dimension must be >= 1");
  if (!(a > 0.5 * (d - 1))) {
    std::ostringstream msg;
    msg << "log_mvgamma: argument " << a << " must exceed (d-1)/2 = " << 0.5 * (d - 1);
    throw Error(ErrorKind::Domain, msg.str());
  }
  double out = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= d; ++j) out += std::lgamma(a + 0.5 * (1 - j));
  return out;
}

double mvn_logpdf(const Vector& z, const Vector& mu, const Matrix& sigma) {
  if (z.size() != mu.size() || sigma.rows() != z.size()) {
    throw Error(ErrorKind::DimMismatch, "mvn_logpdf: inconsistent dimensions");
  }
  const Cholesky chol(sigma);
  const Vector y = chol.solve_lower(z - mu);
  const double d = static_cast<double>(z.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + chol.logdet() + y.squaredNorm());
}

double PcaProjection::explained_variance(Eigen::Index j) const {
  if (samples < 2) return 0.0;
  const double s = singular_values(j);
  return s * s / static_cast<double>(samples - 1);
}

double PcaProjection::explained_ratio(Eigen::Index count) const {
  if (total_variance <= 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < std::min(count, output_dim()); ++j) acc += explained_variance(j);
  return acc / total_variance;
}

Matrix sample_covariance(const Matrix& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) return Matrix::Zero(x.cols(), x.cols());
  const Vector mean = x.colwise().mean();
  const Matrix centred = x.rowwise() - mean.transpose();
  Matrix cov = (centred.transpose() * centred) / static_cast<double>(n - 1);
  return 0.5 * (cov + cov.transpose());
}

Matrix add_ridge(const Matrix& a, double scale) {
  const Eigen::Index d = a.rows();
  const double tr = a.trace();
  const double amount = tr > 0.0 ? scale * tr / static_cast<double>(d) : scale;
  return a + amount * Matrix::Identity(d, d);
}

PcaProjection fit_pca(const Matrix& x, Eigen::Index q) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) throw Error(ErrorKind::Rank, "fit_pca: need at least two rows");
  if (q < 1 || q > std::min(n, d)) {
    std::ostringstream msg;
    msg << "fit_pca: q=" << q << " must lie in [1, min(rows, cols)=" << std::min(n, d) << "]";
    throw Error(ErrorKind::Rank, msg.str());
  }
  PcaProjection out;
  out.samples = static_cast<std::size_t>(n);
  out.mean = x.colwise().mean();
  const Matrix cov = sample_covariance(x);
  out.total_variance = cov.trace();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  // Eigen returns ascending eigenvalues; walk from the top.
  const Vector& values = eig.eigenvalues();
  const double top = std::max(values(d - 1), 0.0);
  const double floor = top * 1e-12;
  Eigen::Index kept = 0;
  for (Eigen::Index j = 0; j < q; ++j) {
    if (values(d - 1 - j) > floor && values(d - 1 - j) > 0.0) ++kept;
    else break;
  }
  out.rank_deficient = kept < q;
  out.basis.resize(d, kept);
  out.singular_values.resize(kept);
  for (Eigen::Index j = 0; j < kept; ++j) {
    Vector v = eig.eigenvectors().col(d - 1 - j);
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.basis.col(j) = v;
    out.singular_values(j) = std::sqrt(values(d - 1 - j) * static_cast<double>(n - 1));
  }
  return out;
}

Vector project(const PcaProjection& pca, const Vector& z) {
  if (z.size() != pca.input_dim()) {
    throw Error(ErrorKind::DimMismatch, "project: input dimension mismatch");
  }
  return pca.basis.transpose() * (z - pca.mean);
}

Matrix project_rows(const PcaProjection& pca, const Matrix& x) {
  if (x.cols() != pca.input_dim()) {
    throw Error(ErrorKind::DimMismatch, "project_rows: input dimension mismatch");
  }
  return (x.rowwise() - pca.mean.transpose()) * pca.basis;
}

PcaProjection identity_projection(Eigen::Index d) {
  PcaProjection out;
  out.basis = Matrix::Identity(d, d);
  out.singular_values = Vector::Zero(d);
  out.mean = Vector::Zero(d);
  return out;
}

}  // namespace gpc

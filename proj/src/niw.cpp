#include "gpc/niw.hpp"

#include <cmath>
#include <numbers>

#include "gpc/error.hpp"
#include "gpc/numkernel.hpp"

namespace gpc {

void NiwHyper::validate() const {
  const Eigen::Index d = dim();
  if (d < 1 || psi.rows() != d || psi.cols() != d) {
    throw Error(ErrorKind::DimMismatch, "NIW prior: inconsistent dimensions");
  }
  if (!(kappa > 0.0)) throw Error(ErrorKind::Domain, "NIW prior: kappa must be > 0");
  if (!(nu > static_cast<double>(d) - 1.0)) {
    throw Error(ErrorKind::Domain, "NIW prior: nu must exceed d - 1");
  }
  Cholesky check(psi);
  (void)check;
}

SuffStats::SuffStats(Eigen::Index dim)
    : mean_(Vector::Zero(dim)), scatter_(Matrix::Zero(dim, dim)) {}

void SuffStats::add(const Vector& z) {
  if (z.size() != dim()) throw Error(ErrorKind::DimMismatch, "SuffStats: point dimension mismatch");
  ++n_;
  const Vector delta = z - mean_;
  mean_ += delta / static_cast<double>(n_);
  scatter_.noalias() += delta * (z - mean_).transpose();
  scatter_ = 0.5 * (scatter_ + scatter_.transpose());
}

SuffStats& SuffStats::operator+=(const SuffStats& other) {
  if (other.dim() != dim()) throw Error(ErrorKind::DimMismatch, "SuffStats: merge dimension mismatch");
  if (other.n_ == 0) return *this;
  if (n_ == 0) {
    *this = other;
    return *this;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double n = na + nb;
  const Vector delta = other.mean_ - mean_;
  scatter_ += other.scatter_ + (na * nb / n) * delta * delta.transpose();
  mean_ += (nb / n) * delta;
  n_ += other.n_;
  return *this;
}

SuffStats operator+(SuffStats a, const SuffStats& b) {
  a += b;
  return a;
}

Vector SuffStats::sum() const { return static_cast<double>(n_) * mean_; }

Matrix SuffStats::sumsq() const {
  return scatter_ + static_cast<double>(n_) * mean_ * mean_.transpose();
}

SuffStats accumulate(const Matrix& points) {
  SuffStats s(points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) s.add(points.row(i).transpose());
  return s;
}

SuffStats accumulate(const Matrix& points, std::span<const std::size_t> rows) {
  SuffStats s(points.cols());
  for (const std::size_t r : rows) {
    if (r >= static_cast<std::size_t>(points.rows())) {
      throw Error(ErrorKind::DimMismatch, "accumulate: row index out of range");
    }
    s.add(points.row(static_cast<Eigen::Index>(r)).transpose());
  }
  return s;
}

NiwHyper default_hyper(const Matrix& x) {
  if (x.rows() < 1 || x.cols() < 1) throw Error(ErrorKind::DimMismatch, "default_hyper: empty data");
  const Eigen::Index d = x.cols();
  NiwHyper h;
  h.m = x.colwise().mean();
  h.kappa = 1.0;
  h.nu = static_cast<double>(d) + 2.0;
  h.psi = add_ridge(sample_covariance(x), 1e-6) / h.nu;
  return h;
}

namespace {

// nu* Psi* in centred-scatter form:
// nu Psi + S + (kappa n / kappa*) (mean - m)(mean - m)^T.
Matrix posterior_scale(const NiwHyper& prior, const SuffStats& stats) {
  const double n = static_cast<double>(stats.n());
  const Vector offset = stats.mean() - prior.m;
  Matrix scale = prior.nu * prior.psi + stats.scatter() +
                 (prior.kappa * n / (prior.kappa + n)) * offset * offset.transpose();
  return 0.5 * (scale + scale.transpose());
}

double scale_logdet_with_ridge(const Matrix& scale) {
  try {
    return cholesky_logdet(scale);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotSPD) throw;
  }
  return cholesky_logdet(add_ridge(scale, 1e-8));
}

}  // namespace

NiwPosterior posterior(const NiwHyper& prior, const SuffStats& stats) {
  const Eigen::Index d = prior.dim();
  if (stats.dim() != d) throw Error(ErrorKind::DimMismatch, "posterior: dimension mismatch");
  const double n = static_cast<double>(stats.n());
  NiwPosterior post;
  post.kappa_star = prior.kappa + n;
  post.nu_star = prior.nu + n;
  if (stats.n() == 0) {
    post.m_star = prior.m;
    post.psi_star = prior.psi;
    return post;
  }
  post.m_star = prior.m + (n / post.kappa_star) * (stats.mean() - prior.m);
  const Matrix scale = posterior_scale(prior, stats);
  post.psi_star = scale / post.nu_star;
  Cholesky check(scale);
  (void)check;
  return post;
}

double log_marginal(const NiwHyper& prior, const SuffStats& stats) {
  if (stats.n() == 0) return 0.0;
  const Eigen::Index d = prior.dim();
  if (stats.dim() != d) throw Error(ErrorKind::DimMismatch, "log_marginal: dimension mismatch");
  const double n = static_cast<double>(stats.n());
  const double dd = static_cast<double>(d);
  const double kappa_star = prior.kappa + n;
  const double nu_star = prior.nu + n;
  const double logdet_prior = cholesky_logdet(prior.nu * prior.psi);
  const double logdet_post = scale_logdet_with_ridge(posterior_scale(prior, stats));
  return -0.5 * n * dd * std::log(std::numbers::pi) + log_mvgamma(static_cast<int>(d), 0.5 * nu_star) -
         log_mvgamma(static_cast<int>(d), 0.5 * prior.nu) + 0.5 * prior.nu * logdet_prior -
         0.5 * nu_star * logdet_post + 0.5 * dd * (std::log(prior.kappa) - std::log(kappa_star));
}

}  // namespace gpc

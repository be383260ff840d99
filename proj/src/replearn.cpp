#include "gpc/replearn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gpc/error.hpp"

namespace gpc {

Encoder Encoder::identity(Eigen::Index d_in, Eigen::Index d_out) {
  if (d_out < 1 || d_out > d_in) throw Error(ErrorKind::DimMismatch, "encoder: need 1 <= d_out <= d_in");
  return {Matrix::Identity(d_out, d_in), Vector::Zero(d_out)};
}

Matrix Encoder::encode_rows(const Matrix& x) const {
  if (x.cols() != input_dim()) throw Error(ErrorKind::DimMismatch, "encoder: input dimension mismatch");
  return (x * weight.transpose()).rowwise() + bias.transpose();
}

double warmup_weight(std::size_t t, std::size_t warmup) {
  if (warmup == 0) return 1.0;
  return std::min(1.0, static_cast<double>(t) / static_cast<double>(warmup));
}

double combined_loss(std::size_t t, double loss_cl, double loss_pcl, std::size_t warmup) {
  return loss_cl + warmup_weight(t, warmup) * loss_pcl;
}

double cosine_lr(double lr0, std::size_t t, std::size_t total) {
  if (total == 0) return lr0;
  const double frac = std::min(1.0, static_cast<double>(t) / static_cast<double>(total));
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

std::pair<Vector, Vector> two_views(const Vector& x, double sigma, std::mt19937_64& rng) {
  if (sigma < 0.0) throw Error(ErrorKind::Domain, "two_views: sigma must be >= 0");
  if (sigma == 0.0) return {x, x};
  std::normal_distribution<double> noise(0.0, sigma);
  Vector a = x;
  Vector b = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) a(j) += noise(rng);
  for (Eigen::Index j = 0; j < x.size(); ++j) b(j) += noise(rng);
  return {std::move(a), std::move(b)};
}

namespace {

// Row-wise softmax of logits with max subtraction; returns log-sum-exp per row.
Vector softmax_rows(Matrix& logits) {
  Vector lse(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - mx).exp().matrix();
    const double s = logits.row(i).sum();
    logits.row(i) /= s;
    lse(i) = mx + std::log(s);
  }
  return lse;
}

}  // namespace

LossGrad loss_cl(const Matrix& z, const Matrix& z_prime, double tau) {
  const Eigen::Index n = z.rows();
  if (z_prime.rows() != n || z_prime.cols() != z.cols()) {
    throw Error(ErrorKind::DimMismatch, "loss_cl: views must have matching shapes");
  }
  if (n < 1) throw Error(ErrorKind::DimMismatch, "loss_cl: empty batch");
  if (!(tau > 0.0)) throw Error(ErrorKind::Domain, "loss_cl: tau must be > 0");
  const Matrix logits = (z * z_prime.transpose()) / tau;
  Matrix prob = logits;
  const Vector lse = softmax_rows(prob);
  LossGrad out;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += lse(i) - logits(i, i);
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss = total * inv_n;
  // d/dlogits = (P - I) / n
  Matrix g = prob;
  g.diagonal().array() -= 1.0;
  g *= inv_n / tau;
  out.grad_first = g * z_prime;
  out.grad_second = g.transpose() * z;
  return out;
}

LossGrad loss_pcl(const Matrix& z, const Matrix& prototypes, std::span<const std::size_t> owner,
                  double tau) {
  const Eigen::Index n = z.rows();
  const Eigen::Index k = prototypes.rows();
  if (static_cast<Eigen::Index>(owner.size()) != n) {
    throw Error(ErrorKind::DimMismatch, "loss_pcl: owner map size mismatch");
  }
  if (prototypes.cols() != z.cols()) throw Error(ErrorKind::DimMismatch, "loss_pcl: dimension mismatch");
  if (!(tau > 0.0)) throw Error(ErrorKind::Domain, "loss_pcl: tau must be > 0");
  for (const std::size_t s : owner) {
    if (s >= static_cast<std::size_t>(k)) throw Error(ErrorKind::OwnerOutOfRange, "loss_pcl: owner out of range");
  }
  const Matrix logits = (z * prototypes.transpose()) / tau;
  Matrix prob = logits;
  const Vector lse = softmax_rows(prob);
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  LossGrad out;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += lse(i) - logits(i, static_cast<Eigen::Index>(owner[i]));
    prob(i, static_cast<Eigen::Index>(owner[i])) -= 1.0;
  }
  out.loss = total * inv_n;
  prob *= inv_n / tau;
  out.grad_first = prob * prototypes;
  out.grad_second = prob.transpose() * z;
  return out;
}

std::vector<Batch> plan_batches(const LabelConstraints& cons, std::size_t batch_labelled,
                                std::size_t batch_unlabelled, std::mt19937_64& rng) {
  std::vector<std::size_t> lab;
  std::vector<std::size_t> unl;
  for (std::size_t i = 0; i < cons.size(); ++i) (cons.is_labelled(i) ? lab : unl).push_back(i);
  const std::size_t n = cons.size();
  const std::size_t per = batch_labelled + batch_unlabelled;
  if (per == 0 || n == 0) return {};
  const std::size_t count = (n + per - 1) / per;

  struct Pool {
    std::vector<std::size_t> items;
    std::size_t cursor = 0;
    std::vector<std::size_t> take(std::size_t want, std::mt19937_64& r) {
      std::vector<std::size_t> out;
      want = std::min(want, items.size());
      while (out.size() < want) {
        if (cursor == items.size()) {
          std::shuffle(items.begin(), items.end(), r);
          cursor = 0;
        }
        out.push_back(items[cursor++]);
      }
      return out;
    }
  };
  Pool lp{std::move(lab), 0};
  Pool up{std::move(unl), 0};
  std::shuffle(lp.items.begin(), lp.items.end(), rng);
  std::shuffle(up.items.begin(), up.items.end(), rng);

  std::vector<Batch> batches(count);
  for (auto& b : batches) {
    b.labelled = lp.take(batch_labelled, rng);
    b.unlabelled = up.take(batch_unlabelled, rng);
  }
  return batches;
}

namespace {

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double nrm = out.row(i).norm();
    if (nrm > 0.0) out.row(i) /= nrm;
  }
  return out;
}

Matrix component_means(const MixtureState& state, const Matrix& space) {
  Matrix means = Matrix::Zero(static_cast<Eigen::Index>(state.k()), space.cols());
  for (std::size_t s = 0; s < state.k(); ++s) {
    const auto& members = state.components[s].members;
    for (const std::size_t r : members) means.row(static_cast<Eigen::Index>(s)) += space.row(static_cast<Eigen::Index>(r));
    if (!members.empty()) means.row(static_cast<Eigen::Index>(s)) /= static_cast<double>(members.size());
  }
  return means;
}

}  // namespace

Matrix prototypes_from_state(const MixtureState& state, const Matrix& projected) {
  return normalized_rows(component_means(state, projected));
}

EncoderGrad encoder_loss(const Encoder& enc, const Matrix& view_a, const Matrix& view_b,
                         const PcaProjection& pca, const Matrix& prototypes,
                         std::span<const std::size_t> owner, double tau, double pcl_weight) {
  struct Forward {
    Matrix raw;   // projected, before normalisation
    Matrix unit;  // L2-normalised rows
    Vector norms;
  };
  auto forward = [&](const Matrix& view) {
    Forward f;
    f.raw = project_rows(pca, enc.encode_rows(view));
    f.norms = f.raw.rowwise().norm();
    f.unit = f.raw;
    for (Eigen::Index i = 0; i < f.unit.rows(); ++i) {
      if (f.norms(i) > 0.0) f.unit.row(i) /= f.norms(i);
    }
    return f;
  };
  const Forward a = forward(view_a);
  const Forward b = forward(view_b);

  EncoderGrad out;
  const LossGrad cl = loss_cl(a.unit, b.unit, tau);
  out.loss_cl = cl.loss;
  Matrix grad_a = cl.grad_first;
  Matrix grad_b = cl.grad_second;
  if (pcl_weight != 0.0 && prototypes.rows() > 0) {
    const LossGrad pcl = loss_pcl(a.unit, prototypes, owner, tau);
    out.loss_pcl = pcl.loss;
    grad_a += pcl_weight * pcl.grad_first;
  } else if (prototypes.rows() > 0) {
    out.loss_pcl = loss_pcl(a.unit, prototypes, owner, tau).loss;
  }
  out.loss = out.loss_cl + pcl_weight * out.loss_pcl;

  out.weight = Matrix::Zero(enc.output_dim(), enc.input_dim());
  out.bias = Vector::Zero(enc.output_dim());
  auto backward = [&](const Forward& f, const Matrix& grad_unit, const Matrix& view) {
    Matrix grad_raw(grad_unit.rows(), grad_unit.cols());
    for (Eigen::Index i = 0; i < grad_unit.rows(); ++i) {
      if (!(f.norms(i) > 0.0)) {
        grad_raw.row(i).setZero();
        continue;
      }
      const double along = f.unit.row(i).dot(grad_unit.row(i));
      grad_raw.row(i) = (grad_unit.row(i) - along * f.unit.row(i)) / f.norms(i);
    }
    const Matrix grad_z = grad_raw * pca.basis.transpose();  // n x d_out
    out.weight += grad_z.transpose() * view;
    out.bias += grad_z.colwise().sum().transpose();
  };
  backward(a, grad_a, view_a);
  backward(b, grad_b, view_b);
  return out;
}

Encoder train_epoch(const Encoder& enc, const Matrix& x, const MixtureState& state,
                    const PcaProjection& pca, const LabelConstraints& cons,
                    const TrainConfig& config, std::size_t t, std::mt19937_64& rng) {
  const double lr = cosine_lr(config.lr, t, config.epochs);
  if (lr == 0.0) return enc;
  if (static_cast<std::size_t>(x.rows()) != cons.size() || state.assignment.size() != cons.size()) {
    throw Error(ErrorKind::DimMismatch, "train_epoch: data, labels and state disagree in size");
  }
  const double weight = warmup_weight(t, config.warmup);
  Encoder out = enc;

  // Component means in encoder space; projected per epoch or per batch.
  const Matrix encoded = enc.encode_rows(x);
  const Matrix means_z = component_means(state, encoded);
  Matrix prototypes;
  if (config.pca_refresh == PcaRefresh::Epoch) {
    prototypes = normalized_rows(project_rows(pca, means_z));
  }

  const std::vector<Batch> batches =
      plan_batches(cons, config.batch_labelled, config.batch_unlabelled, rng);
  for (const Batch& batch : batches) {
    std::vector<std::size_t> rows = batch.labelled;
    rows.insert(rows.end(), batch.unlabelled.begin(), batch.unlabelled.end());
    if (rows.size() < 2) continue;
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    Matrix view_a(n, x.cols());
    Matrix view_b(n, x.cols());
    std::vector<std::size_t> owner(rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t r = rows[static_cast<std::size_t>(i)];
      auto [va, vb] = two_views(x.row(static_cast<Eigen::Index>(r)).transpose(), config.aug_sigma, rng);
      view_a.row(i) = va.transpose();
      view_b.row(i) = vb.transpose();
      owner[static_cast<std::size_t>(i)] = state.assignment[r];
    }
    const PcaProjection* active = &pca;
    PcaProjection batch_pca;
    if (config.pca_refresh == PcaRefresh::Batch) {
      Matrix clean(n, x.cols());
      for (Eigen::Index i = 0; i < n; ++i) clean.row(i) = x.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
      const Eigen::Index q = std::min<Eigen::Index>({pca.output_dim(), n, out.output_dim()});
      batch_pca = fit_pca(out.encode_rows(clean), q);
      active = &batch_pca;
      prototypes = normalized_rows(project_rows(batch_pca, means_z));
    }
    const EncoderGrad g = encoder_loss(out, view_a, view_b, *active, prototypes, owner, config.tau, weight);
    out.weight -= lr * g.weight;
    out.bias -= lr * g.bias;
  }
  return out;
}

}  // namespace gpc

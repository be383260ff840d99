#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "gpc/numkernel.hpp"
#include "gpc/splitmerge.hpp"
#include "gpc/sskmeans.hpp"
#include "gpc/types.hpp"

namespace gpc {

/// Affine feature map z = W x + b.
struct Encoder {
  Matrix weight;  // d_out x d_in
  Vector bias;    // d_out

  /// First d_out rows of the identity, zero bias.
  static Encoder identity(Eigen::Index d_in, Eigen::Index d_out);

  Eigen::Index input_dim() const { return weight.cols(); }
  Eigen::Index output_dim() const { return weight.rows(); }
  Vector encode(const Vector& x) const { return weight * x + bias; }
  /// Row-wise encoding of a data matrix.
  Matrix encode_rows(const Matrix& x) const;
};

enum class PcaRefresh { Epoch, Batch };

struct TrainConfig {
  double tau = 0.1;
  std::size_t warmup = 20;  // T in lambda(t) = min(1, t/T)
  std::size_t epochs = 200;  // length of the cosine schedule
  std::size_t batch_labelled = 64;
  std::size_t batch_unlabelled = 64;
  double lr = 0.1;
  double aug_sigma = 0.1;
  PcaRefresh pca_refresh = PcaRefresh::Epoch;
};

/// lambda(t) = min(1, t / T).
double warmup_weight(std::size_t t, std::size_t warmup);
/// L_CL + lambda(t) L_PCL.
double combined_loss(std::size_t t, double loss_cl, double loss_pcl, std::size_t warmup);
/// Cosine-annealed rate for epoch t of `total`.
double cosine_lr(double lr0, std::size_t t, std::size_t total);

/// Two independently perturbed copies x + eps, x + eps', eps ~ N(0, sigma^2 I).
std::pair<Vector, Vector> two_views(const Vector& x, double sigma, std::mt19937_64& rng);

struct LossGrad {
  double loss = 0.0;
  Matrix grad_first;   // d loss / d (first argument), same shape
  Matrix grad_second;  // d loss / d (second argument), same shape
};

/// Mean over anchors of -log softmax_i(z_i . z'_j / tau); rows are instances.
LossGrad loss_cl(const Matrix& z, const Matrix& z_prime, double tau);

/// Mean over anchors of -log softmax_{owner(i)}(z_i . mu_j / tau) over all K
/// prototypes (rows of `prototypes`). grad_second is w.r.t. the prototypes.
LossGrad loss_pcl(const Matrix& z, const Matrix& prototypes, std::span<const std::size_t> owner,
                  double tau);

/// One training batch: indices into the data matrix.
struct Batch {
  std::vector<std::size_t> labelled;
  std::vector<std::size_t> unlabelled;
};

/// ceil(N / n) batches of n_l labelled + n_u unlabelled instances drawn from
/// reshuffled pools (pools smaller than the quota are used whole).
std::vector<Batch> plan_batches(const LabelConstraints& cons, std::size_t batch_labelled,
                                std::size_t batch_unlabelled, std::mt19937_64& rng);

/// Unit-norm component means of the encoded data in projected space.
Matrix prototypes_from_state(const MixtureState& state, const Matrix& projected);

/// Forward/backward of the combined loss for one set of inputs with views
/// already drawn. Returns the loss and accumulates parameter gradients.
struct EncoderGrad {
  double loss = 0.0;
  double loss_cl = 0.0;
  double loss_pcl = 0.0;
  Matrix weight;
  Vector bias;
};
EncoderGrad encoder_loss(const Encoder& enc, const Matrix& view_a, const Matrix& view_b,
                         const PcaProjection& pca, const Matrix& prototypes,
                         std::span<const std::size_t> owner, double tau, double pcl_weight);

/// One epoch of SGD on L_CL + lambda(t) L_PCL through the affine encoder, the
/// fixed projection and L2 normalisation.
Encoder train_epoch(const Encoder& enc, const Matrix& x, const MixtureState& state,
                    const PcaProjection& pca, const LabelConstraints& cons,
                    const TrainConfig& config, std::size_t t, std::mt19937_64& rng);

}  // namespace gpc

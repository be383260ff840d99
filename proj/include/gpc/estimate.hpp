#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gpc/niw.hpp"
#include "gpc/numkernel.hpp"
#include "gpc/replearn.hpp"
#include "gpc/splitmerge.hpp"

namespace gpc {

/// Overrides applied on top of default_hyper.
struct PriorOverrides {
  std::optional<double> kappa;
  std::optional<double> nu;
  double psi_scale = 1.0;  // multiplies nu * Psi
};

NiwHyper make_prior(const Matrix& z, const PriorOverrides& overrides);

struct LoopConfig {
  std::size_t k_init = 0;  // 0 selects default_k_init(K^l)
  std::size_t epochs = 200;
  std::size_t patience = 15;
  std::size_t pca_q = 128;       // clamped to the encoder output dimension
  std::size_t encoder_dim = 0;   // 0 keeps the input dimension
  bool replearn = true;
  MixtureConfig mixture;
  PriorOverrides prior;
  TrainConfig train;
};

struct LoopResult {
  MixtureState state;
  std::size_t k_init = 0;
  std::vector<std::size_t> k_history;  // K after each epoch's round
  std::vector<SplitMergeLog> logs;
  Encoder encoder;
  PcaProjection pca;
  Matrix embedding;  // projected features the final state refers to
};

/// Called after initialisation (epoch 0) and after every refit and every
/// split/merge round with the state and the embedding it refers to.
using EpochObserver =
    std::function<void(std::size_t epoch, const MixtureState& state, const Matrix& embedding)>;

/// Embeds the data through the encoder and a PCA with min(q, d) directions.
std::pair<Matrix, PcaProjection> embed(const Encoder& enc, const Matrix& x, std::size_t q);

/// Alternates mixture refits, optional encoder training and split/merge
/// rounds until `epochs` or until K is unchanged for `patience` epochs.
LoopResult estimate_k_loop(const Matrix& x, const LabelConstraints& cons, const LoopConfig& config,
                           std::uint64_t seed, const EpochObserver& observer = {});

/// Final cluster for each instance: the owning component for labelled
/// instances, the nearest prototype otherwise.
std::vector<std::size_t> final_assignment(const LoopResult& result, const LabelConstraints& cons);

struct ProbeResult {
  std::vector<ClassId> retained;
  std::vector<ClassId> probed;
  std::size_t k_init = 0;
  std::size_t k_est = 0;
  long k_novel_est = 0;
  std::vector<std::size_t> k_history;
};

/// Splits the labelled classes into retained and probe parts, hides the
/// probe labels and estimates how many probe classes exist.
/// `k_novel_init` defaults to round-half-up(|retained| / 2).
ProbeResult probe_k_on_labelled(const Matrix& x, const Labels& labels, double split_ratio,
                                const LoopConfig& config, std::uint64_t seed,
                                std::optional<std::size_t> k_novel_init = std::nullopt);

}  // namespace gpc

#include "gpc/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gpc/error.hpp"

namespace gpc {

NiwHyper make_prior(const Matrix& z, const PriorOverrides& overrides) {
  NiwHyper h = default_hyper(z);
  const double scale_nu = h.nu;
  if (overrides.kappa) h.kappa = *overrides.kappa;
  if (overrides.nu) h.nu = *overrides.nu;
  // Keep nu * Psi fixed when nu changes, then apply the requested scale.
  h.psi = h.psi * (scale_nu / h.nu) * overrides.psi_scale;
  h.validate();
  return h;
}

std::pair<Matrix, PcaProjection> embed(const Encoder& enc, const Matrix& x, std::size_t q) {
  const Matrix z = enc.encode_rows(x);
  const Eigen::Index limit = std::min(z.cols(), z.rows());
  const Eigen::Index dirs = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(q), 1, limit);
  PcaProjection pca = fit_pca(z, dirs);
  Matrix v = project_rows(pca, z);
  return {std::move(v), std::move(pca)};
}

LoopResult estimate_k_loop(const Matrix& x, const LabelConstraints& cons, const LoopConfig& config,
                           std::uint64_t seed, const EpochObserver& observer) {
  if (static_cast<std::size_t>(x.rows()) != cons.size()) {
    throw Error(ErrorKind::DimMismatch, "estimate_k_loop: labels do not match the data");
  }
  std::mt19937_64 rng(seed);
  LoopResult res;
  const Eigen::Index d_out = config.encoder_dim == 0 ? x.cols() : static_cast<Eigen::Index>(config.encoder_dim);
  res.encoder = Encoder::identity(x.cols(), d_out);

  std::size_t k_init = config.k_init == 0 ? default_k_init(cons.num_classes()) : config.k_init;
  // Free centres need unlabelled points to live on.
  k_init = std::min(k_init, cons.num_classes() + cons.unlabelled_indices().size());
  k_init = std::max<std::size_t>(k_init, 1);
  res.k_init = k_init;

  std::tie(res.embedding, res.pca) = embed(res.encoder, x, config.pca_q);
  res.state = init_mixture(res.embedding, cons, k_init, rng(), config.mixture);
  if (observer) observer(0, res.state, res.embedding);

  TrainConfig train = config.train;
  if (train.epochs == 0) train.epochs = config.epochs;
  std::size_t unchanged = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (epoch > 1) std::tie(res.embedding, res.pca) = embed(res.encoder, x, config.pca_q);
    res.state.epoch = epoch;
    refit(res.state, res.embedding, cons, config.mixture);
    if (observer) observer(epoch, res.state, res.embedding);

    if (config.replearn) {
      res.encoder = train_epoch(res.encoder, x, res.state, res.pca, cons, train, epoch - 1, rng);
    }

    const NiwHyper prior = make_prior(res.embedding, config.prior);
    const std::size_t k_before = res.state.k();
    auto [next, log] = split_merge_round(std::move(res.state), res.embedding, cons, prior, config.mixture);
    res.state = std::move(next);
    res.logs.push_back(std::move(log));
    res.k_history.push_back(res.state.k());
    if (observer) observer(epoch, res.state, res.embedding);

    unchanged = res.state.k() == k_before ? unchanged + 1 : 0;
    if (config.patience > 0 && unchanged >= config.patience) break;
  }
  return res;
}

std::vector<std::size_t> final_assignment(const LoopResult& result, const LabelConstraints& cons) {
  std::vector<std::size_t> out(cons.size());
  for (std::size_t i = 0; i < cons.size(); ++i) {
    if (cons.is_labelled(i)) {
      out[i] = result.state.assignment[i];
    } else {
      out[i] = assign_by_prototype(result.state, result.embedding.row(static_cast<Eigen::Index>(i)).transpose());
    }
  }
  return out;
}

ProbeResult probe_k_on_labelled(const Matrix& x, const Labels& labels, double split_ratio,
                                const LoopConfig& config, std::uint64_t seed,
                                std::optional<std::size_t> k_novel_init) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw Error(ErrorKind::DimMismatch, "probe: labels do not match the data");
  }
  if (split_ratio < 0.0 || split_ratio > 1.0) throw Error(ErrorKind::Domain, "probe: ratio must lie in [0, 1]");
  std::vector<std::size_t> rows;
  Labels kept;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      rows.push_back(i);
      kept.push_back(labels[i]);
    }
  }
  const LabelConstraints all = LabelConstraints::from_labels(kept);
  if (all.num_classes() < 4) throw Error(ErrorKind::TooFewClasses, "probe: need at least 4 labelled classes");

  ProbeResult out;
  std::vector<ClassId> classes = all.classes;
  std::mt19937_64 rng(seed);
  std::shuffle(classes.begin(), classes.end(), rng);
  const auto probe_count = static_cast<std::size_t>(std::floor(split_ratio * static_cast<double>(classes.size()) + 0.5));
  if (classes.size() - probe_count < 1) throw Error(ErrorKind::TooFewClasses, "probe: no retained classes left");
  out.probed.assign(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(probe_count));
  out.retained.assign(classes.begin() + static_cast<std::ptrdiff_t>(probe_count), classes.end());
  std::sort(out.probed.begin(), out.probed.end());
  std::sort(out.retained.begin(), out.retained.end());

  Matrix sub(static_cast<Eigen::Index>(rows.size()), x.cols());
  Labels visible(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    sub.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    if (!std::binary_search(out.probed.begin(), out.probed.end(), *kept[r])) visible[r] = kept[r];
  }
  const LabelConstraints cons = LabelConstraints::from_labels(visible);

  LoopConfig cfg = config;
  const std::size_t novel_init = k_novel_init.value_or((out.retained.size() + 1) / 2);
  cfg.k_init = std::max<std::size_t>(1, out.retained.size() + novel_init);
  const LoopResult res = estimate_k_loop(sub, cons, cfg, rng());
  out.k_init = res.k_init;
  out.k_est = res.state.k();
  out.k_novel_est = static_cast<long>(out.k_est) - static_cast<long>(out.retained.size());
  out.k_history = res.k_history;
  return out;
}

}  // namespace gpc

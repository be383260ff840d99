#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gpc/datasetio.hpp"
#include "gpc/error.hpp"
#include "gpc/estimate.hpp"

using namespace gpc;

namespace {

SyntheticData blobs(std::size_t k_true, std::size_t kl, std::uint64_t seed, std::size_t per_class = 100,
                    double min_separation = 10.0) {
  SynthSpec spec;
  spec.min_separation = min_separation;
  spec.k_true = k_true;
  spec.k_labelled = kl;
  spec.per_class = per_class;
  spec.seed = seed;
  return gen_synth(spec);
}

LoopConfig quick() {
  LoopConfig cfg;
  cfg.replearn = false;
  cfg.epochs = 60;
  return cfg;
}

}  // namespace

TEST_CASE("prior overrides") {
  const auto data = blobs(4, 2, 1);
  const NiwHyper base = default_hyper(data.dataset.x);
  const NiwHyper same = make_prior(data.dataset.x, {});
  CHECK(same.kappa == base.kappa);
  CHECK(same.nu == base.nu);
  CHECK((same.psi - base.psi).norm() <= 1e-12 * base.psi.norm());

  PriorOverrides o;
  o.kappa = 0.5;
  o.nu = base.nu + 3.0;
  o.psi_scale = 0.1;
  const NiwHyper h = make_prior(data.dataset.x, o);
  CHECK(h.kappa == 0.5);
  CHECK(h.nu == base.nu + 3.0);
  CHECK(((h.nu * h.psi) - 0.1 * base.nu * base.psi).norm() <= 1e-9 * base.psi.norm());

  o.nu = 0.5;  // below d - 1
  CHECK_THROWS_AS(make_prior(data.dataset.x, o), Error);
}

TEST_CASE("default K_init and clamp") {
  const auto data = blobs(10, 6, 2);
  const auto cons = LabelConstraints::from_labels(data.dataset.labels);
  LoopConfig cfg = quick();
  cfg.epochs = 0;
  CHECK(estimate_k_loop(data.dataset.x, cons, cfg, 1).k_init == 9);

  Labels tiny(12);
  for (std::size_t i = 0; i < 10; ++i) tiny[i] = static_cast<ClassId>(i % 2);
  cfg.k_init = 50;
  const auto res = estimate_k_loop(data.dataset.x.topRows(12), LabelConstraints::from_labels(tiny), cfg, 1);
  CHECK(res.k_init == 4);
  CHECK(res.state.k() == 4);
}

TEST_CASE("zero epochs returns the initial mixture") {
  const auto data = blobs(6, 3, 3);
  const auto cons = LabelConstraints::from_labels(data.dataset.labels);
  LoopConfig cfg = quick();
  cfg.epochs = 0;
  cfg.k_init = 7;
  const auto res = estimate_k_loop(data.dataset.x, cons, cfg, 4);
  CHECK(res.state.k() == 7);
  CHECK(res.k_history.empty());
  CHECK(res.logs.empty());
  CHECK(count_constraint_violations(res.state, cons) == 0);
}

TEST_CASE("fully labelled data keeps K at the class count") {
  const auto data = blobs(5, 5, 4, 40);
  Labels all(data.truth.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = data.truth[i];
  const auto cons = LabelConstraints::from_labels(all);
  const auto res = estimate_k_loop(data.dataset.x, cons, quick(), 2);
  CHECK(res.k_init == 5);
  CHECK(res.state.k() == 5);
  for (const std::size_t k : res.k_history) CHECK(k == 5);
}

TEST_CASE("loop bookkeeping and constraint observer") {
  const auto data = blobs(8, 4, 5, 200);
  const auto cons = LabelConstraints::from_labels(data.dataset.labels);
  LoopConfig cfg = quick();
  cfg.k_init = 3;
  try {
    estimate_k_loop(data.dataset.x, cons, cfg, 6);
    FAIL("expected InfeasibleK");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleK);
  }
  cfg.k_init = 4;
  cfg.patience = 5;
  std::size_t calls = 0, violations = 0, below = 0;
  const auto res = estimate_k_loop(data.dataset.x, cons, cfg, 6, [&](std::size_t, const MixtureState& s, const Matrix& z) {
    ++calls;
    violations += count_constraint_violations(s, cons);
    below += s.k() < cons.num_classes();
    CHECK(s.assignment.size() == static_cast<std::size_t>(z.rows()));
  });
  CHECK(res.k_init == 4);
  CHECK(violations == 0);
  CHECK(below == 0);
  CHECK(calls == 1 + 2 * res.k_history.size());
  CHECK(res.logs.size() == res.k_history.size());
  CHECK(res.k_history.back() == res.state.k());
  if (res.k_history.size() < cfg.epochs) {
    // Stopped early: the last `patience` rounds left K unchanged.
    const auto& h = res.k_history;
    for (std::size_t t = h.size() - cfg.patience; t < h.size(); ++t) {
      const std::size_t before = t == 0 ? res.k_init : h[t - 1];
      CHECK(h[t] == before);
    }
  }
  CHECK(res.state.k() == 8);
}

TEST_CASE("final assignment") {
  const auto data = blobs(6, 3, 7);
  const auto cons = LabelConstraints::from_labels(data.dataset.labels);
  const auto res = estimate_k_loop(data.dataset.x, cons, quick(), 8);
  const auto assign = final_assignment(res, cons);
  REQUIRE(assign.size() == cons.size());
  for (std::size_t i = 0; i < assign.size(); ++i) {
    CHECK(assign[i] < res.state.k());
    if (cons.is_labelled(i)) CHECK(assign[i] == res.state.assignment[i]);
  }
}

TEST_CASE("loop is deterministic with replearn") {
  const auto data = blobs(5, 3, 9, 60);
  const auto cons = LabelConstraints::from_labels(data.dataset.labels);
  LoopConfig cfg;
  cfg.epochs = 5;
  const auto a = estimate_k_loop(data.dataset.x, cons, cfg, 3);
  const auto b = estimate_k_loop(data.dataset.x, cons, cfg, 3);
  CHECK(a.k_history == b.k_history);
  CHECK(a.state.assignment == b.state.assignment);
  CHECK(a.encoder.weight == b.encoder.weight);
  CHECK(a.embedding == b.embedding);
}

TEST_CASE("probing on labelled classes") {
  const auto data = blobs(10, 8, 10, 200);
  const Matrix& x = data.dataset.x;
  const Labels& labels = data.dataset.labels;

  const auto zero = probe_k_on_labelled(x, labels, 0.0, quick(), 1);
  CHECK(zero.probed.empty());
  CHECK(zero.retained.size() == 8);
  CHECK(std::abs(zero.k_novel_est) <= 1);

  const auto half = probe_k_on_labelled(x, labels, 0.5, quick(), 1);
  CHECK(half.probed.size() == 4);
  CHECK(half.retained.size() == 4);
  CHECK(half.k_init == 6);  // 4 retained + round-half-up(4 / 2)
  CHECK(std::abs(half.k_novel_est - 4) <= 1);
  const auto again = probe_k_on_labelled(x, labels, 0.5, quick(), 1);
  CHECK(again.k_est == half.k_est);
  CHECK(again.probed == half.probed);

  const auto custom = probe_k_on_labelled(x, labels, 0.5, quick(), 1, 7);
  CHECK(custom.k_init == 11);

  CHECK_THROWS_AS(probe_k_on_labelled(x, labels, 1.5, quick(), 1), Error);
  CHECK_THROWS_AS(probe_k_on_labelled(x, labels, 1.0, quick(), 1), Error);
  const auto few = blobs(5, 3, 11);
  try {
    probe_k_on_labelled(few.dataset.x, few.dataset.labels, 0.5, quick(), 1);
    FAIL("expected TooFewClasses");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewClasses);
  }
}

TEST_CASE("probe recovers the hidden class count across seeds") {
  int hits = 0;
  long err_small = 0, err_large = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = blobs(8, 8, 100 + seed, 200, 15.0);
    const auto res = probe_k_on_labelled(data.dataset.x, data.dataset.labels, 0.5, quick(), seed);
    hits += res.k_novel_est >= 3 && res.k_novel_est <= 5;
    err_small += std::abs(res.k_novel_est - 4);
    const auto big = probe_k_on_labelled(data.dataset.x, data.dataset.labels, 0.5, quick(), seed, 40);
    err_large += std::abs(big.k_novel_est - 4);
  }
  CHECK(hits >= 8);
  CHECK(err_small <= err_large);
}

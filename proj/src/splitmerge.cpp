#include "gpc/splitmerge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "gpc/error.hpp"
#include "gpc/parallel.hpp"

namespace gpc {

std::size_t default_k_init(std::size_t labelled_classes) {
  // K^l + K^l/2 with halves rounded up.
  return labelled_classes + (labelled_classes + 1) / 2;
}

double log_gamma_count(std::size_t n, GammaConvention convention) {
  const double x = static_cast<double>(n);
  return convention == GammaConvention::Factorial ? std::lgamma(x + 1.0) : std::lgamma(x);
}

namespace {

Vector mean_of(const Matrix& z, const std::vector<std::size_t>& rows) {
  Vector m = Vector::Zero(z.cols());
  for (const std::size_t r : rows) m += z.row(static_cast<Eigen::Index>(r)).transpose();
  return rows.empty() ? m : Vector(m / static_cast<double>(rows.size()));
}

void label_bookkeeping(GaussComponent& c, const LabelConstraints& cons) {
  c.label.reset();
  c.labelled_count = 0;
  for (const std::size_t r : c.members) {
    if (const auto& l = cons.labelled_of[r]) {
      ++c.labelled_count;
      c.label = *l;
    }
  }
}

SubComponent as_sub(const GaussComponent& c, double total) {
  SubComponent s;
  s.mean = c.mean;
  s.cov = c.cov;
  s.weight = static_cast<double>(c.size()) / total;
  s.members = c.members;
  return s;
}

double log_h_rows(const Matrix& z, const NiwHyper& prior, std::span<const std::size_t> rows) {
  return log_marginal(prior, accumulate(z, rows));
}

}  // namespace

GaussComponent make_component(const Matrix& z, std::vector<std::size_t> members,
                              const LabelConstraints& cons, std::uint64_t seed,
                              CovarianceMode mode) {
  std::sort(members.begin(), members.end());
  GaussComponent c;
  c.members = std::move(members);
  c.mean = mean_of(z, c.members);
  c.cov = ridged_covariance(z, c.members, mode);
  label_bookkeeping(c, cons);
  if (c.size() >= 2) c.sub = subcluster(z, c.members, seed, mode, &cons.labelled_of);
  return c;
}

void normalize(MixtureState& state, std::size_t n) {
  state.assignment.assign(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < state.components.size(); ++i) {
    auto& c = state.components[i];
    c.weight = static_cast<double>(c.size()) / static_cast<double>(n);
    for (const std::size_t r : c.members) state.assignment[r] = i;
  }
}

namespace {

void rebuild_from_assignment(MixtureState& state, const Matrix& z, const LabelConstraints& cons,
                             const std::vector<std::size_t>& assignment, std::size_t k,
                             CovarianceMode mode) {
  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t i = 0; i < assignment.size(); ++i) groups[assignment[i]].push_back(i);
  state.components.clear();
  state.components.reserve(k);
  for (auto& g : groups) state.components.push_back(make_component(z, std::move(g), cons, state.rng(), mode));
  normalize(state, assignment.size());
}

}  // namespace

MixtureState init_mixture(const Matrix& z, const LabelConstraints& cons, std::size_t k_init,
                          std::uint64_t seed, const MixtureConfig& config) {
  MixtureState state;
  state.rng.seed(seed);
  const KMeansResult km = ss_kmeans(z, cons, k_init, state.rng());
  rebuild_from_assignment(state, z, cons, km.assignment, k_init, config.covariance);
  return state;
}

void refit(MixtureState& state, const Matrix& z, const LabelConstraints& cons,
           const MixtureConfig& config) {
  const std::size_t k = state.k();
  KMeansOptions opts;
  Matrix centers(static_cast<Eigen::Index>(k), z.cols());
  opts.owner_of_class.assign(cons.num_classes(), std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = state.components[i];
    centers.row(static_cast<Eigen::Index>(i)) = mean_of(z, c.members).transpose();
    if (c.label) opts.owner_of_class[cons.class_index(*c.label)] = i;
  }
  opts.init_centers = std::move(centers);
  const KMeansResult km = ss_kmeans(z, cons, k, state.rng(), opts);
  rebuild_from_assignment(state, z, cons, km.assignment, k, config.covariance);
}

double log_hs(const MixtureState& state, const Matrix& z, const NiwHyper& prior, std::size_t i,
              GammaConvention convention) {
  const auto& c = state.components.at(i);
  if (!c.sub || !c.sub->splittable()) {
    throw Error(ErrorKind::TooFewPoints, "log_hs: component has an empty sub-component");
  }
  const auto& a = c.sub->parts[0].members;
  const auto& b = c.sub->parts[1].members;
  return log_gamma_count(a.size(), convention) + log_h_rows(z, prior, a) +
         log_gamma_count(b.size(), convention) + log_h_rows(z, prior, b) -
         log_gamma_count(c.size(), convention) - log_h_rows(z, prior, c.members);
}

double log_hm(const MixtureState& state, const Matrix& z, const NiwHyper& prior, std::size_t i,
              std::size_t j, GammaConvention convention) {
  if (i == j) throw Error(ErrorKind::Domain, "log_hm: components must differ");
  const auto& a = state.components.at(i);
  const auto& b = state.components.at(j);
  std::vector<std::size_t> both;
  both.reserve(a.size() + b.size());
  std::merge(a.members.begin(), a.members.end(), b.members.begin(), b.members.end(),
             std::back_inserter(both));
  return log_gamma_count(both.size(), convention) + log_h_rows(z, prior, both) -
         log_gamma_count(a.size(), convention) - log_h_rows(z, prior, a.members) -
         log_gamma_count(b.size(), convention) - log_h_rows(z, prior, b.members);
}

void apply_vetoes(const MixtureState& state, std::vector<Proposal>& proposals, SplitVeto mode) {
  for (auto& p : proposals) {
    if (p.kind == Proposal::Kind::Split) {
      const auto& c = state.components.at(p.first);
      const bool blocked = mode == SplitVeto::AnyLabelled ? c.labelled_count > 0
                                                          : c.labelled_count == c.size();
      if (blocked) p.veto_reason = "labelled_cluster";
    } else {
      const auto& a = state.components.at(p.first);
      const auto& b = state.components.at(p.second);
      if (a.label && b.label && *a.label != *b.label) p.veto_reason = "cross_class";
    }
    if (p.veto_reason) p.p = 0.0;
  }
}

namespace {

double acceptance_probability(double log_h) {
  if (std::isnan(log_h)) return 0.0;
  return log_h >= 0.0 ? 1.0 : std::exp(log_h);
}

// Draws u for each proposal in order and decides acceptance.
void decide(Proposal& p, std::mt19937_64& rng, bool force) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  p.u = unif(rng);
  if (p.veto_reason) {
    p.p = 0.0;
    p.accepted = false;
    return;
  }
  p.p = acceptance_probability(p.log_h);
  p.accepted = force || p.u < p.p;
}

}  // namespace

std::pair<MixtureState, SplitMergeLog> split_merge_round(MixtureState state, const Matrix& z,
                                                         const LabelConstraints& cons,
                                                         const NiwHyper& prior,
                                                         const MixtureConfig& config) {
  const std::size_t n = static_cast<std::size_t>(z.rows());
  SplitMergeLog log;
  log.epoch = state.epoch;
  log.k_before = state.k();

  // Splits.
  const std::size_t k = state.k();
  std::vector<Proposal> splits(k);
  parallel_for(k, [&](std::size_t i) {
    Proposal& p = splits[i];
    p.kind = Proposal::Kind::Split;
    p.first = p.second = i;
    const auto& c = state.components[i];
    if (c.sub && c.sub->splittable()) {
      p.log_h = log_hs(state, z, prior, i, config.gamma);
    } else {
      p.log_h = std::numeric_limits<double>::quiet_NaN();
      p.veto_reason = "unsplittable";
    }
  });
  apply_vetoes(state, splits, config.split_veto);

  std::vector<GaussComponent> next;
  std::vector<bool> fresh;
  for (std::size_t i = 0; i < k; ++i) {
    decide(splits[i], state.rng, config.force_accept);
    auto& c = state.components[i];
    if (!splits[i].accepted) {
      next.push_back(std::move(c));
      fresh.push_back(false);
      continue;
    }
    for (auto& part : c.sub->parts) {
      next.push_back(make_component(z, std::move(part.members), cons, state.rng(), config.covariance));
      fresh.push_back(true);
    }
  }
  log.proposals = std::move(splits);
  state.components = std::move(next);

  // Merge candidates: each pre-existing component with its nearest
  // pre-existing neighbour, greedy by distance.
  std::vector<std::size_t> old_ids;
  for (std::size_t i = 0; i < state.k(); ++i) {
    if (!fresh[i]) old_ids.push_back(i);
  }
  struct Pair {
    double dist;
    std::size_t a, b;
  };
  std::vector<Pair> pairs;
  for (const std::size_t a : old_ids) {
    std::size_t best = a;
    double best_d = std::numeric_limits<double>::infinity();
    for (const std::size_t b : old_ids) {
      if (b == a) continue;
      const double d = (state.components[a].mean - state.components[b].mean).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = b;
      }
    }
    if (best != a) pairs.push_back({best_d, std::min(a, best), std::max(a, best)});
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    if (x.dist != y.dist) return x.dist < y.dist;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  pairs.erase(std::unique(pairs.begin(), pairs.end(),
                          [](const Pair& x, const Pair& y) { return x.a == y.a && x.b == y.b; }),
              pairs.end());

  std::vector<Proposal> merges(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t t) {
    Proposal& p = merges[t];
    p.kind = Proposal::Kind::Merge;
    p.first = pairs[t].a;
    p.second = pairs[t].b;
    p.log_h = log_hm(state, z, prior, p.first, p.second, config.gamma);
  });
  apply_vetoes(state, merges, config.split_veto);

  std::vector<bool> used(state.k(), false);
  std::vector<std::size_t> absorbed_into(state.k(), std::numeric_limits<std::size_t>::max());
  for (auto& p : merges) {
    if (used[p.first] || used[p.second]) continue;
    decide(p, state.rng, config.force_accept);
    log.proposals.push_back(p);
    if (!p.accepted) continue;
    used[p.first] = used[p.second] = true;
    absorbed_into[p.second] = p.first;
  }

  std::vector<GaussComponent> merged;
  for (std::size_t i = 0; i < state.k(); ++i) {
    if (absorbed_into[i] != std::numeric_limits<std::size_t>::max()) continue;
    auto& c = state.components[i];
    const auto partner = std::find(absorbed_into.begin(), absorbed_into.end(), i);
    if (partner == absorbed_into.end()) {
      merged.push_back(std::move(c));
      continue;
    }
    const auto& other = state.components[static_cast<std::size_t>(partner - absorbed_into.begin())];
    std::vector<std::size_t> rows;
    std::merge(c.members.begin(), c.members.end(), other.members.begin(), other.members.end(),
               std::back_inserter(rows));
    GaussComponent m;
    m.members = std::move(rows);
    m.mean = mean_of(z, m.members);
    m.cov = ridged_covariance(z, m.members, config.covariance);
    label_bookkeeping(m, cons);
    SubclusterResult sub;
    sub.parts[0] = as_sub(c, static_cast<double>(m.size()));
    sub.parts[1] = as_sub(other, static_cast<double>(m.size()));
    m.sub = std::move(sub);
    merged.push_back(std::move(m));
  }
  state.components = std::move(merged);
  normalize(state, n);
  log.k_after = state.k();
  return {std::move(state), std::move(log)};
}

std::size_t assign_by_prototype(const MixtureState& state, const Vector& v) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < state.k(); ++i) {
    const double d = (state.components[i].mean - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::size_t count_constraint_violations(const MixtureState& state, const LabelConstraints& cons) {
  std::map<std::pair<ClassId, std::size_t>, std::size_t> cell;
  std::map<ClassId, std::size_t> per_class;
  std::map<std::size_t, std::size_t> per_comp;
  for (std::size_t i = 0; i < cons.size(); ++i) {
    const auto& l = cons.labelled_of[i];
    if (!l) continue;
    const std::size_t comp = state.assignment.at(i);
    ++cell[{*l, comp}];
    ++per_class[*l];
    ++per_comp[comp];
  }
  auto pairs = [](std::size_t m) { return m * (m - 1) / 2; };
  std::size_t same_cell = 0;
  for (const auto& [key, m] : cell) same_cell += pairs(m);
  std::size_t same_class = 0;
  for (const auto& [c, m] : per_class) same_class += pairs(m);
  std::size_t same_comp = 0;
  for (const auto& [c, m] : per_comp) same_comp += pairs(m);
  // must-link broken: same class, different component; cannot-link broken:
  // same component, different class.
  return (same_class - same_cell) + (same_comp - same_cell);
}

}  // namespace gpc

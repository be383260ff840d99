#include "gpc/sskmeans.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "gpc/error.hpp"
#include "gpc/numkernel.hpp"

namespace gpc {

LabelConstraints LabelConstraints::from_labels(Labels labels) {
  LabelConstraints cons;
  cons.labelled_of = std::move(labels);
  for (const auto& l : cons.labelled_of) {
    if (l) cons.classes.push_back(*l);
  }
  std::sort(cons.classes.begin(), cons.classes.end());
  cons.classes.erase(std::unique(cons.classes.begin(), cons.classes.end()), cons.classes.end());
  return cons;
}

std::size_t LabelConstraints::class_index(ClassId c) const {
  const auto it = std::lower_bound(classes.begin(), classes.end(), c);
  if (it == classes.end() || *it != c) {
    throw Error(ErrorKind::Domain, "class id " + std::to_string(c) + " is not a labelled class");
  }
  return static_cast<std::size_t>(it - classes.begin());
}

std::vector<std::size_t> LabelConstraints::unlabelled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labelled_of.size(); ++i) {
    if (!labelled_of[i]) out.push_back(i);
  }
  return out;
}

double kmeans_inertia(const Matrix& x, const Matrix& centers,
                      std::span<const std::size_t> assignment) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    total += (x.row(i) - centers.row(static_cast<Eigen::Index>(assignment[i]))).squaredNorm();
  }
  return total;
}

namespace {

using Rng = std::mt19937_64;

struct LloydInput {
  const Matrix& x;
  // class index per instance, or npos for unlabelled
  std::vector<std::size_t> class_of;
  std::vector<std::size_t> unlabelled;
};

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

std::size_t nearest(const Matrix& centers, const Eigen::RowVectorXd& p, double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (centers.row(c) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

// Weighted D^2 draw; returns npos when every weight is zero.
std::size_t draw_d2(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) return npos;
  std::uniform_real_distribution<double> unif(0.0, total);
  const double target = unif(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc && weights[i] > 0.0) return i;
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return npos;
}

KMeansResult lloyd(const LloydInput& in, Matrix centers, std::vector<std::size_t> owner,
                   std::size_t max_iter) {
  const Matrix& x = in.x;
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const Eigen::Index k = centers.rows();
  KMeansResult res;
  res.owner_of_class = owner;
  std::vector<std::size_t> assign(n, npos);
  std::vector<double> dist(n, 0.0);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    std::vector<std::size_t> next(n);
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = x.row(static_cast<Eigen::Index>(i));
      if (in.class_of[i] != npos) {
        next[i] = owner[in.class_of[i]];
        dist[i] = (centers.row(static_cast<Eigen::Index>(next[i])) - row).squaredNorm();
      } else {
        next[i] = nearest(centers, row, &dist[i]);
      }
      ++counts[next[i]];
    }
    // Empty centres take the unlabelled point farthest from its centre.
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] != 0) continue;
      std::size_t pick = npos;
      double pick_d = -1.0;
      for (const std::size_t i : in.unlabelled) {
        if (counts[next[i]] > 1 && dist[i] > pick_d) {
          pick_d = dist[i];
          pick = i;
        }
      }
      if (pick == npos) {
        throw Error(ErrorKind::InfeasibleK, "ss_kmeans: cannot fill an empty cluster");
      }
      --counts[next[pick]];
      next[pick] = static_cast<std::size_t>(c);
      ++counts[static_cast<std::size_t>(c)];
      centers.row(c) = x.row(static_cast<Eigen::Index>(pick));
      dist[pick] = 0.0;
    }
    const bool changed = next != assign;
    assign = std::move(next);

    Matrix sums = Matrix::Zero(k, x.cols());
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(assign[i])) += x.row(static_cast<Eigen::Index>(i));
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    res.inertia_trace.push_back(kmeans_inertia(x, centers, assign));
    res.iterations = iter + 1;
    if (!changed) break;
  }
  res.centers = std::move(centers);
  res.assignment = std::move(assign);
  res.inertia = res.inertia_trace.back();
  return res;
}

}  // namespace

KMeansResult ss_kmeans(const Matrix& x, const LabelConstraints& cons, std::size_t k,
                       std::uint64_t seed, const KMeansOptions& options) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const std::size_t kl = cons.num_classes();
  if (cons.size() != n) throw Error(ErrorKind::DimMismatch, "ss_kmeans: label map size mismatch");
  if (k < kl) {
    std::ostringstream msg;
    msg << "ss_kmeans: k=" << k << " is below the number of labelled classes " << kl;
    throw Error(ErrorKind::InfeasibleK, msg.str());
  }
  if (k == 0 || k > n) throw Error(ErrorKind::InfeasibleK, "ss_kmeans: k must lie in [1, N]");

  LloydInput in{x, std::vector<std::size_t>(n, npos), cons.unlabelled_indices()};
  for (std::size_t i = 0; i < n; ++i) {
    if (cons.labelled_of[i]) in.class_of[i] = cons.class_index(*cons.labelled_of[i]);
  }
  const std::size_t free = k - kl;
  if (free > in.unlabelled.size()) {
    throw Error(ErrorKind::InfeasibleK, "ss_kmeans: more free centres than unlabelled points");
  }

  if (options.init_centers) {
    const Matrix& init = *options.init_centers;
    if (static_cast<std::size_t>(init.rows()) != k || init.cols() != x.cols()) {
      throw Error(ErrorKind::DimMismatch, "ss_kmeans: warm-start centres have wrong shape");
    }
    if (options.owner_of_class.size() != kl) {
      throw Error(ErrorKind::DimMismatch, "ss_kmeans: warm start needs an owner for every class");
    }
    std::vector<bool> seen(k, false);
    for (const std::size_t o : options.owner_of_class) {
      if (o >= k || seen[o]) throw Error(ErrorKind::InfeasibleK, "ss_kmeans: invalid class ownership");
      seen[o] = true;
    }
    return lloyd(in, init, options.owner_of_class, options.max_iter);
  }

  // Labelled class means.
  Matrix base = Matrix::Zero(static_cast<Eigen::Index>(k), x.cols());
  std::vector<std::size_t> class_counts(kl, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (in.class_of[i] == npos) continue;
    base.row(static_cast<Eigen::Index>(in.class_of[i])) += x.row(static_cast<Eigen::Index>(i));
    ++class_counts[in.class_of[i]];
  }
  for (std::size_t c = 0; c < kl; ++c) {
    base.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(class_counts[c]);
  }
  std::vector<std::size_t> owner(kl);
  for (std::size_t c = 0; c < kl; ++c) owner[c] = c;

  Rng rng(seed);
  const std::size_t restarts = free == 0 ? 1 : std::max<std::size_t>(1, options.n_init);
  std::optional<KMeansResult> best;
  for (std::size_t r = 0; r < restarts; ++r) {
    Matrix centers = base;
    std::vector<double> d2(in.unlabelled.size(), std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < kl; ++c) {
      for (std::size_t u = 0; u < in.unlabelled.size(); ++u) {
        const double d = (x.row(static_cast<Eigen::Index>(in.unlabelled[u])) -
                          centers.row(static_cast<Eigen::Index>(c))).squaredNorm();
        d2[u] = std::min(d2[u], d);
      }
    }
    for (std::size_t c = kl; c < k; ++c) {
      std::size_t pick = npos;
      if (c == 0) {
        std::uniform_int_distribution<std::size_t> pick_dist(0, in.unlabelled.size() - 1);
        pick = pick_dist(rng);
      } else {
        pick = draw_d2(d2, rng);
        if (pick == npos) {
          // Every unlabelled point already sits on a centre.
          std::uniform_int_distribution<std::size_t> pick_dist(0, in.unlabelled.size() - 1);
          pick = pick_dist(rng);
        }
      }
      centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(in.unlabelled[pick]));
      for (std::size_t u = 0; u < in.unlabelled.size(); ++u) {
        const double d = (x.row(static_cast<Eigen::Index>(in.unlabelled[u])) -
                          centers.row(static_cast<Eigen::Index>(c))).squaredNorm();
        d2[u] = std::min(d2[u], d);
      }
    }
    KMeansResult res = lloyd(in, std::move(centers), owner, options.max_iter);
    if (!best || res.inertia < best->inertia) best = std::move(res);
  }
  return std::move(*best);
}

Matrix ridged_covariance(const Matrix& x, std::span<const std::size_t> rows, CovarianceMode mode) {
  const Eigen::Index d = x.cols();
  Matrix sel(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    sel.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
  }
  Matrix cov = sample_covariance(sel);
  if (mode == CovarianceMode::Diag) cov = Matrix(cov.diagonal().asDiagonal());
  return add_ridge(cov, 1e-6);
}

namespace {

struct Unit {
  Eigen::RowVectorXd mean;
  double weight = 0.0;
  std::vector<std::size_t> rows;
};

struct TwoMeans {
  std::vector<std::size_t> side;  // per unit
  double inertia = 0.0;
};

TwoMeans two_means(const std::vector<Unit>& units, Rng& rng) {
  const std::size_t m = units.size();
  std::vector<double> weights(m);
  for (std::size_t u = 0; u < m; ++u) weights[u] = units[u].weight;
  std::array<Eigen::RowVectorXd, 2> c;
  const std::size_t first = draw_d2(weights, rng);
  c[0] = units[first].mean;
  std::vector<double> d2(m);
  for (std::size_t u = 0; u < m; ++u) d2[u] = units[u].weight * (units[u].mean - c[0]).squaredNorm();
  const std::size_t second = draw_d2(d2, rng);
  c[1] = second == npos ? c[0] : units[second].mean;

  TwoMeans out;
  out.side.assign(m, npos);
  for (std::size_t iter = 0; iter < 300; ++iter) {
    std::vector<std::size_t> next(m);
    std::array<double, 2> mass{0.0, 0.0};
    std::vector<double> dist(m);
    for (std::size_t u = 0; u < m; ++u) {
      const double d0 = (units[u].mean - c[0]).squaredNorm();
      const double d1 = (units[u].mean - c[1]).squaredNorm();
      next[u] = d1 < d0 ? 1 : 0;
      dist[u] = std::min(d0, d1) * units[u].weight;
      mass[next[u]] += units[u].weight;
    }
    for (std::size_t s = 0; s < 2; ++s) {
      if (mass[s] > 0.0) continue;
      std::size_t pick = npos;
      double pick_d = 0.0;
      for (std::size_t u = 0; u < m; ++u) {
        if (dist[u] > pick_d) {
          pick_d = dist[u];
          pick = u;
        }
      }
      if (pick == npos) break;  // all units coincide with the centres
      mass[next[pick]] -= units[pick].weight;
      next[pick] = s;
      mass[s] += units[pick].weight;
      dist[pick] = 0.0;
    }
    const bool changed = next != out.side;
    out.side = std::move(next);
    for (std::size_t s = 0; s < 2; ++s) {
      if (mass[s] <= 0.0) continue;
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(c[0].size());
      for (std::size_t u = 0; u < m; ++u) {
        if (out.side[u] == s) acc += units[u].weight * units[u].mean;
      }
      c[s] = acc / mass[s];
    }
    if (!changed) break;
  }
  out.inertia = 0.0;
  for (std::size_t u = 0; u < m; ++u) {
    out.inertia += units[u].weight * (units[u].mean - c[out.side[u]]).squaredNorm();
  }
  return out;
}

}  // namespace

SubclusterResult subcluster(const Matrix& x, std::span<const std::size_t> members, std::uint64_t seed,
                            CovarianceMode mode, const Labels* labels) {
  if (members.size() < 2) {
    throw Error(ErrorKind::TooFewPoints, "subcluster: need at least two points");
  }
  std::vector<Unit> units;
  std::map<ClassId, std::size_t> block_of;
  for (const std::size_t r : members) {
    const auto row = x.row(static_cast<Eigen::Index>(r));
    std::optional<ClassId> label;
    if (labels && !labels->empty()) label = (*labels)[r];
    if (label) {
      auto [it, inserted] = block_of.try_emplace(*label, units.size());
      if (inserted) units.push_back({Eigen::RowVectorXd::Zero(x.cols()), 0.0, {}});
      Unit& u = units[it->second];
      u.mean += row;
      u.weight += 1.0;
      u.rows.push_back(r);
    } else {
      units.push_back({row, 1.0, {r}});
    }
  }
  for (auto& [cls, idx] : block_of) units[idx].mean /= units[idx].weight;

  Rng rng(seed);
  TwoMeans best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 3; ++attempt) {
    TwoMeans tm = two_means(units, rng);
    if (tm.inertia < best.inertia) best = std::move(tm);
  }

  SubclusterResult res;
  for (std::size_t u = 0; u < units.size(); ++u) {
    auto& dst = res.parts[best.side[u]].members;
    dst.insert(dst.end(), units[u].rows.begin(), units[u].rows.end());
  }
  const double total = static_cast<double>(members.size());
  for (auto& part : res.parts) {
    std::sort(part.members.begin(), part.members.end());
    part.weight = static_cast<double>(part.members.size()) / total;
  }
  for (std::size_t s = 0; s < 2; ++s) {
    auto& part = res.parts[s];
    const auto& source = part.members.empty() ? res.parts[1 - s].members : part.members;
    part.mean = Vector::Zero(x.cols());
    for (const std::size_t r : source) part.mean += x.row(static_cast<Eigen::Index>(r)).transpose();
    part.mean /= static_cast<double>(source.size());
    part.cov = ridged_covariance(x, source, mode);
  }
  return res;
}

}  // namespace gpc

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "gpc/error.hpp"
#include "gpc/sskmeans.hpp"
#include "test_support.hpp"

using namespace gpc;
using gpc::testing::random_matrix;

namespace {

struct Blobs {
  Matrix x;
  std::vector<int> truth;
  Matrix centers;
};

Blobs make_blobs(int k, int per, double sep, std::uint64_t seed, int dim = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Blobs b;
  b.centers = Matrix::Zero(k, dim);
  for (int c = 0; c < k; ++c) b.centers(c, 0) = sep * c;
  b.x.resize(k * per, dim);
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per; ++i) {
      for (int j = 0; j < dim; ++j) b.x(c * per + i, j) = b.centers(c, j) + g(rng);
      b.truth.push_back(c);
    }
  }
  return b;
}

bool constraints_hold(const KMeansResult& r, const LabelConstraints& cons) {
  std::map<ClassId, std::size_t> cluster_of;
  std::map<std::size_t, ClassId> class_of;
  for (std::size_t i = 0; i < cons.size(); ++i) {
    if (!cons.labelled_of[i]) continue;
    const ClassId c = *cons.labelled_of[i];
    const std::size_t a = r.assignment[i];
    if (auto it = cluster_of.find(c); it != cluster_of.end() && it->second != a) return false;
    if (auto it = class_of.find(a); it != class_of.end() && it->second != c) return false;
    cluster_of[c] = a;
    class_of[a] = c;
  }
  return true;
}

// Smallest k-means objective over every assignment of n points to k
// non-empty clusters.
double exhaustive_optimum(const Matrix& x, std::size_t k) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> a(n, 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
    if (i == n) {
      if (used != k) return;
      double cost = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        Vector mean = Vector::Zero(x.cols());
        double cnt = 0;
        for (std::size_t t = 0; t < n; ++t) {
          if (a[t] == c) {
            mean += x.row(static_cast<Eigen::Index>(t)).transpose();
            ++cnt;
          }
        }
        mean /= cnt;
        for (std::size_t t = 0; t < n; ++t) {
          if (a[t] == c) cost += (x.row(static_cast<Eigen::Index>(t)).transpose() - mean).squaredNorm();
        }
      }
      best = std::min(best, cost);
      return;
    }
    // Canonical labelling: a point may open at most one new cluster.
    for (std::size_t c = 0; c <= std::min(used, k - 1); ++c) {
      a[i] = c;
      rec(i + 1, std::max(used, c + 1));
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("label constraints bookkeeping") {
  Labels l{3, std::nullopt, 1, 3, std::nullopt};
  const auto cons = LabelConstraints::from_labels(l);
  CHECK(cons.num_classes() == 2);
  CHECK(cons.classes == std::vector<ClassId>{1, 3});
  CHECK(cons.class_index(3) == 1);
  CHECK_THROWS_AS(cons.class_index(7), Error);
  CHECK(cons.unlabelled_indices() == std::vector<std::size_t>{1, 4});
  CHECK(cons.is_labelled(0));
  CHECK_FALSE(cons.is_labelled(1));
}

TEST_CASE("fully labelled data reproduces the label map") {
  const auto b = make_blobs(3, 10, 5.0, 1);
  Labels l;
  for (int t : b.truth) l.emplace_back(10 + t);
  const auto cons = LabelConstraints::from_labels(l);
  const auto r = ss_kmeans(b.x, cons, 3, 7);
  for (std::size_t i = 0; i < l.size(); ++i) CHECK(r.assignment[i] == r.owner_of_class[cons.class_index(*l[i])]);
  for (int c = 0; c < 3; ++c) {
    const Vector mean = b.x.middleRows(c * 10, 10).colwise().mean().transpose();
    CHECK((r.centers.row(static_cast<Eigen::Index>(r.owner_of_class[c])).transpose() - mean).norm() < 1e-12);
  }
}

TEST_CASE("one unlabelled cluster is the data mean") {
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(25, 3, rng);
  const auto cons = LabelConstraints::from_labels(Labels(25));
  const auto r = ss_kmeans(x, cons, 1, 3);
  const Vector mean = x.colwise().mean().transpose();
  CHECK((r.centers.row(0).transpose() - mean).norm() < 1e-12);
  CHECK(r.inertia == doctest::Approx((x.rowwise() - mean.transpose()).squaredNorm()));
}

TEST_CASE("separated blobs are recovered with half the classes labelled") {
  const auto b = make_blobs(4, 30, 20.0, 5);
  Labels l(b.truth.size());
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (b.truth[i] < 2 && i % 2 == 0) l[i] = b.truth[i];
  }
  const auto cons = LabelConstraints::from_labels(l);
  const auto r = ss_kmeans(b.x, cons, 4, 11);
  // Oracle: nearest true centre.
  std::map<std::size_t, std::set<int>> classes_in;
  for (std::size_t i = 0; i < l.size(); ++i) {
    Eigen::Index nearest = 0;
    (b.centers.rowwise() - b.x.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&nearest);
    CHECK(nearest == b.truth[i]);
    classes_in[r.assignment[i]].insert(b.truth[i]);
  }
  CHECK(classes_in.size() == 4);
  for (const auto& [cluster, cls] : classes_in) CHECK(cls.size() == 1);
}

TEST_CASE("infeasible k") {
  std::mt19937_64 rng(3);
  const Matrix x = random_matrix(6, 2, rng);
  Labels l{0, 1, 2, std::nullopt, std::nullopt, std::nullopt};
  const auto cons = LabelConstraints::from_labels(l);
  CHECK_THROWS_AS(ss_kmeans(x, cons, 2, 1), Error);
  CHECK_THROWS_AS(ss_kmeans(x, cons, 7, 1), Error);
  CHECK_NOTHROW(ss_kmeans(x, cons, 6, 1));
  try {
    ss_kmeans(x, cons, 2, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleK);
  }
}

TEST_CASE("constraints, monotone inertia, determinism on random instances") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> cls(0, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    const Matrix x = random_matrix(60, 2, rng, 3.0);
    Labels l(60);
    for (auto& v : l) {
      if (u(rng) < 0.3) v = cls(rng);
    }
    const auto cons = LabelConstraints::from_labels(l);
    const std::size_t k = cons.num_classes() + 1 + rep % 4;
    const auto r = ss_kmeans(x, cons, k, static_cast<std::uint64_t>(rep));
    CHECK(constraints_hold(r, cons));
    for (std::size_t t = 1; t < r.inertia_trace.size(); ++t) {
      CHECK(r.inertia_trace[t] <= r.inertia_trace[t - 1] + 1e-9 * std::abs(r.inertia_trace[t - 1]));
    }
    CHECK(r.inertia == doctest::Approx(kmeans_inertia(x, r.centers, r.assignment)));
    for (const std::size_t a : r.assignment) CHECK(a < k);
    const auto again = ss_kmeans(x, cons, k, static_cast<std::uint64_t>(rep));
    CHECK(again.assignment == r.assignment);
    CHECK(again.centers == r.centers);
  }
}

TEST_CASE("warm start keeps owners and converges") {
  const auto b = make_blobs(3, 20, 10.0, 8);
  Labels l(b.truth.size());
  l[0] = 0;
  const auto cons = LabelConstraints::from_labels(l);
  const auto cold = ss_kmeans(b.x, cons, 3, 4);
  KMeansOptions opt;
  opt.init_centers = cold.centers;
  opt.owner_of_class = cold.owner_of_class;
  const auto warm = ss_kmeans(b.x, cons, 3, 99, opt);
  CHECK(warm.assignment == cold.assignment);
  CHECK(warm.owner_of_class == cold.owner_of_class);
}

TEST_CASE("unlabelled k-means reaches the exhaustive optimum on small instances") {
  std::mt19937_64 rng(314);
  std::uniform_int_distribution<int> nsz(4, 10);
  int hits = 0;
  const int trials = 100;
  for (int rep = 0; rep < trials; ++rep) {
    const int n = nsz(rng);
    const std::size_t k = 1 + static_cast<std::size_t>(rep % 3);
    const Matrix x = random_matrix(n, 2, rng);
    const auto r = ss_kmeans(x, LabelConstraints::from_labels(Labels(n)), k, static_cast<std::uint64_t>(rep));
    const double opt = exhaustive_optimum(x, k);
    CHECK(r.inertia >= opt - 1e-9);
    if (r.inertia <= opt + 1e-9) ++hits;
  }
  MESSAGE("optimum reached on " << hits << "/" << trials);
  CHECK(hits >= 95);
}

TEST_CASE("subcluster basics") {
  Matrix two(2, 1);
  two << -1.0, 4.0;
  const std::vector<std::size_t> both{0, 1};
  const auto s = subcluster(two, both, 1);
  CHECK(s.splittable());
  CHECK(s.parts[0].weight == doctest::Approx(0.5));
  CHECK(s.parts[1].weight == doctest::Approx(0.5));
  CHECK(std::min(s.parts[0].mean(0), s.parts[1].mean(0)) == doctest::Approx(-1.0));
  CHECK(std::max(s.parts[0].mean(0), s.parts[1].mean(0)) == doctest::Approx(4.0));

  const std::vector<std::size_t> one{0};
  CHECK_THROWS_AS(subcluster(two, one, 1), Error);

  const Matrix same = Matrix::Constant(5, 2, 3.0);
  const std::vector<std::size_t> all{0, 1, 2, 3, 4};
  const auto d = subcluster(same, all, 2);
  CHECK_FALSE(d.splittable());
  CHECK(d.parts[0].members == all);
  CHECK((d.parts[0].mean - Vector::Constant(2, 3.0)).norm() == 0.0);
  CHECK((d.parts[1].mean - Vector::Constant(2, 3.0)).norm() == 0.0);
}

TEST_CASE("subcluster of a symmetric bimodal set") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> eps(-0.05, 0.05);
  Matrix x(20, 1);
  for (int i = 0; i < 20; ++i) x(i, 0) = (i < 10 ? -3.0 : 3.0) + eps(rng);
  std::vector<std::size_t> rows(20);
  for (std::size_t i = 0; i < 20; ++i) rows[i] = i;
  const auto s = subcluster(x, rows, 3);
  // Oracle: best contiguous cut of the sorted points (optimal in 1-D).
  std::vector<double> v(x.data(), x.data() + 20);
  std::sort(v.begin(), v.end());
  double best = std::numeric_limits<double>::infinity(), lo = 0, hi = 0;
  for (int cut = 1; cut < 20; ++cut) {
    double m1 = 0, m2 = 0;
    for (int i = 0; i < cut; ++i) m1 += v[i] / cut;
    for (int i = cut; i < 20; ++i) m2 += v[i] / (20 - cut);
    double cost = 0;
    for (int i = 0; i < 20; ++i) cost += std::pow(v[i] - (i < cut ? m1 : m2), 2);
    if (cost < best) {
      best = cost;
      lo = m1;
      hi = m2;
    }
  }
  const double a = std::min(s.parts[0].mean(0), s.parts[1].mean(0));
  const double b = std::max(s.parts[0].mean(0), s.parts[1].mean(0));
  CHECK(a == doctest::Approx(lo).epsilon(1e-12));
  CHECK(b == doctest::Approx(hi).epsilon(1e-12));
  CHECK(std::abs(a + 3.0) < 0.2);
  CHECK(std::abs(b - 3.0) < 0.2);
  CHECK(s.parts[0].weight + s.parts[1].weight == doctest::Approx(1.0));
}

TEST_CASE("subcluster keeps labelled classes together") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> cls(0, 2);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix x = random_matrix(30, 2, rng, 4.0);
    Labels l(30);
    for (int i = 0; i < 30; i += 3) l[i] = cls(rng);
    std::vector<std::size_t> rows(30);
    for (std::size_t i = 0; i < 30; ++i) rows[i] = i;
    const auto s = subcluster(x, rows, static_cast<std::uint64_t>(rep), CovarianceMode::Full, &l);
    std::map<ClassId, std::set<int>> sides;
    for (int p = 0; p < 2; ++p) {
      for (const std::size_t m : s.parts[p].members) {
        if (l[m]) sides[*l[m]].insert(p);
      }
    }
    for (const auto& [c, side] : sides) CHECK(side.size() == 1);
    CHECK(s.parts[0].members.size() + s.parts[1].members.size() == 30);
  }
}

TEST_CASE("ridged covariance modes") {
  Matrix x(3, 2);
  x << 0, 0, 1, 1, 2, 2;
  const std::vector<std::size_t> rows{0, 1, 2};
  const Matrix full = ridged_covariance(x, rows, CovarianceMode::Full);
  const Matrix diag = ridged_covariance(x, rows, CovarianceMode::Diag);
  CHECK(full(0, 1) == doctest::Approx(1.0));
  CHECK(diag(0, 1) == 0.0);
  CHECK(full(0, 0) == doctest::Approx(1.0 + 1e-6));
  CHECK(diag(1, 1) == doctest::Approx(1.0 + 1e-6));
}

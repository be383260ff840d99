#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "gpc/error.hpp"
#include "gpc/evalmetrics.hpp"

using namespace gpc;

namespace {

// Best total agreement over every injective matching, by enumerating all
// permutations of the padded class list.
std::size_t brute_force_correct(const std::vector<ClassId>& y, const std::vector<std::int64_t>& p) {
  std::vector<ClassId> classes(y.begin(), y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<std::int64_t> clusters(p.begin(), p.end());
  std::sort(clusters.begin(), clusters.end());
  clusters.erase(std::unique(clusters.begin(), clusters.end()), clusters.end());
  const std::size_t dim = std::max(classes.size(), clusters.size());
  std::vector<std::size_t> perm(dim);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const auto r = static_cast<std::size_t>(std::lower_bound(clusters.begin(), clusters.end(), p[i]) - clusters.begin());
      if (perm[r] < classes.size() && classes[perm[r]] == y[i]) ++hits;
    }
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("small accuracy examples") {
  const std::vector<ClassId> y{0, 0, 1, 1};
  const std::vector<std::int64_t> p{0, 1, 0, 1};
  CHECK(hungarian_acc(y, p).acc_all == 0.5);

  const std::vector<std::int64_t> relabel{7, 7, 3, 3};
  const auto rep = hungarian_acc(y, relabel);
  CHECK(rep.acc_all == 1.0);
  CHECK(rep.matching.at(7) == 0);
  CHECK(rep.matching.at(3) == 1);

  const std::vector<std::int64_t> bad{1, 2};
  CHECK_THROWS_AS(hungarian_acc(y, bad), Error);
}

TEST_CASE("assignment solver on a known matrix") {
  Matrix w(3, 3);
  w << 1, 2, 3, 2, 4, 6, 3, 6, 9;
  const auto m = max_weight_assignment(w);
  double total = 0.0;
  std::set<std::size_t> cols;
  for (std::size_t r = 0; r < 3; ++r) {
    total += w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m[r]));
    cols.insert(m[r]);
  }
  CHECK(cols.size() == 3);
  CHECK(total == 14.0);
}

TEST_CASE("matches exhaustive permutation search") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> kdist(1, 6);
  std::uniform_int_distribution<int> ndist(1, 60);
  for (int rep = 0; rep < 200; ++rep) {
    const int kt = kdist(rng), kp = kdist(rng), n = ndist(rng);
    std::uniform_int_distribution<int> ct(0, kt - 1), cp(0, kp - 1);
    std::vector<ClassId> y(static_cast<std::size_t>(n));
    std::vector<std::int64_t> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = 10 + ct(rng);
      p[static_cast<std::size_t>(i)] = 100 * cp(rng);
    }
    std::vector<ClassId> old{10, 12};
    const auto r = hungarian_acc(y, p, old);
    CHECK(r.correct_all == brute_force_correct(y, p));
    CHECK(r.correct_all == r.correct_old + r.correct_new);
    CHECK(r.m_all == r.m_old + r.m_new);
    CHECK(std::llround(r.acc_all * static_cast<double>(r.m_all)) ==
          std::llround(r.acc_old * static_cast<double>(r.m_old)) + std::llround(r.acc_new * static_cast<double>(r.m_new)));
    std::set<ClassId> targets;
    for (const auto& [cluster, cls] : r.matching) CHECK(targets.insert(cls).second);
  }
}

TEST_CASE("relabelling invariance and random matchings") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> c(0, 4);
  std::vector<ClassId> y(300);
  std::vector<std::int64_t> p(300);
  for (std::size_t i = 0; i < 300; ++i) {
    y[i] = c(rng);
    p[i] = rng() % 3 == 0 ? c(rng) : y[i];
  }
  const auto base = hungarian_acc(y, p);

  std::vector<std::int64_t> perm{3, 0, 4, 1, 2};
  std::vector<std::int64_t> p2(300);
  std::vector<ClassId> y2(300);
  for (std::size_t i = 0; i < 300; ++i) {
    p2[i] = perm[static_cast<std::size_t>(p[i])] + 50;
    y2[i] = perm[static_cast<std::size_t>(y[i])] * 7;
  }
  CHECK(hungarian_acc(y, p2).acc_all == base.acc_all);
  CHECK(hungarian_acc(y2, p).acc_all == base.acc_all);

  std::vector<std::size_t> m(5);
  std::iota(m.begin(), m.end(), 0);
  for (int t = 0; t < 100; ++t) {
    std::shuffle(m.begin(), m.end(), rng);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < 300; ++i) hits += static_cast<ClassId>(m[static_cast<std::size_t>(p[i])]) == y[i];
    CHECK(base.correct_all >= hits);
  }
}

TEST_CASE("unmatched clusters and empty subsets") {
  const std::vector<ClassId> y{0, 0, 0, 1};
  const std::vector<std::int64_t> p{0, 1, 2, 3};
  const auto r = hungarian_acc(y, p);
  CHECK(r.k_est == 4);
  CHECK(r.k_true == 2);
  CHECK(r.matching.size() == 2);
  CHECK(r.correct_all == 2);
  CHECK(r.acc_old == 0.0);  // no old classes given
  CHECK(r.m_old == 0);
}

TEST_CASE("class-count error") {
  CHECK(k_error(20, 20) == 0);
  CHECK(k_error(112, 100) == 12);
  CHECK(k_error(18, 25) == -7);
}

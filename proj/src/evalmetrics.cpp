#include "gpc/evalmetrics.hpp"

#include <algorithm>
#include <limits>

#include "gpc/error.hpp"

namespace gpc {

std::vector<std::size_t> max_weight_assignment(const Matrix& weights) {
  const Eigen::Index n = weights.rows();
  if (weights.cols() != n) throw Error(ErrorKind::DimMismatch, "assignment: matrix must be square");
  if (n == 0) return {};
  // Minimise cost = max - w with the O(n^3) potential-based Hungarian method
  // (1-based arrays, column 0 is a sentinel).
  const double top = weights.maxCoeff();
  const auto sz = static_cast<std::size_t>(n);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(sz + 1, 0.0), v(sz + 1, 0.0);
  std::vector<std::size_t> p(sz + 1, 0), way(sz + 1, 0);
  auto cost = [&](std::size_t i, std::size_t j) {
    return top - weights(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1));
  };
  for (std::size_t i = 1; i <= sz; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(sz + 1, inf);
    std::vector<bool> used(sz + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= sz; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= sz; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(sz);
  for (std::size_t j = 1; j <= sz; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

EvalReport hungarian_acc(std::span<const ClassId> y_true, std::span<const std::int64_t> y_pred,
                         std::span<const ClassId> old_classes) {
  if (y_true.size() != y_pred.size()) throw Error(ErrorKind::DimMismatch, "hungarian_acc: length mismatch");
  if (y_true.empty()) throw Error(ErrorKind::DimMismatch, "hungarian_acc: no instances");

  std::vector<ClassId> classes(y_true.begin(), y_true.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<std::int64_t> clusters(y_pred.begin(), y_pred.end());
  std::sort(clusters.begin(), clusters.end());
  clusters.erase(std::unique(clusters.begin(), clusters.end()), clusters.end());

  auto index_in = [](const auto& sorted, auto value) {
    return static_cast<Eigen::Index>(std::lower_bound(sorted.begin(), sorted.end(), value) - sorted.begin());
  };
  const Eigen::Index dim = static_cast<Eigen::Index>(std::max(classes.size(), clusters.size()));
  Matrix counts = Matrix::Zero(dim, dim);  // rows: clusters, cols: classes
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    counts(index_in(clusters, y_pred[i]), index_in(classes, y_true[i])) += 1.0;
  }
  const std::vector<std::size_t> match = max_weight_assignment(counts);

  EvalReport rep;
  rep.k_true = classes.size();
  rep.k_est = clusters.size();
  for (std::size_t r = 0; r < clusters.size(); ++r) {
    if (match[r] < classes.size()) rep.matching[clusters[r]] = classes[match[r]];
  }
  std::vector<ClassId> old(old_classes.begin(), old_classes.end());
  std::sort(old.begin(), old.end());
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const auto it = rep.matching.find(y_pred[i]);
    const bool correct = it != rep.matching.end() && it->second == y_true[i];
    const bool is_old = std::binary_search(old.begin(), old.end(), y_true[i]);
    ++rep.m_all;
    rep.correct_all += correct;
    if (is_old) {
      ++rep.m_old;
      rep.correct_old += correct;
    } else {
      ++rep.m_new;
      rep.correct_new += correct;
    }
  }
  auto ratio = [](std::size_t c, std::size_t m) { return m == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(m); };
  rep.acc_all = ratio(rep.correct_all, rep.m_all);
  rep.acc_old = ratio(rep.correct_old, rep.m_old);
  rep.acc_new = ratio(rep.correct_new, rep.m_new);
  return rep;
}

long k_error(std::size_t k_est, std::size_t k_true) {
  return static_cast<long>(k_est) - static_cast<long>(k_true);
}

}  // namespace gpc

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "gpc/types.hpp"

namespace gpc {

/// Maximum-weight assignment on a square matrix (Kuhn-Munkres). Returns, for
/// each row, the column it is matched to.
std::vector<std::size_t> max_weight_assignment(const Matrix& weights);

struct EvalReport {
  double acc_all = 0.0;
  double acc_old = 0.0;
  double acc_new = 0.0;
  std::map<std::int64_t, ClassId> matching;  // predicted cluster -> true class
  std::size_t k_true = 0;
  std::size_t k_est = 0;
  std::size_t m_all = 0, m_old = 0, m_new = 0;
  std::size_t correct_all = 0, correct_old = 0, correct_new = 0;
};

/// Clustering accuracy under the optimal one-to-one matching of predicted
/// clusters to true classes. Old/new accuracies reuse the global matching;
/// an empty subset scores 0.
EvalReport hungarian_acc(std::span<const ClassId> y_true, std::span<const std::int64_t> y_pred,
                         std::span<const ClassId> old_classes = {});

/// K_est - K_true.
long k_error(std::size_t k_est, std::size_t k_true);

}  // namespace gpc

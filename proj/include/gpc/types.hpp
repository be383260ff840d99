#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace gpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Class identifier as stored in datasets; unlabelled instances carry no id.
using ClassId = std::int64_t;
using Labels = std::vector<std::optional<ClassId>>;

}  // namespace gpc

#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace dobs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Zero-based node index. External file formats use one-based indices.
using NodeIndex = std::size_t;

}  // namespace dobs

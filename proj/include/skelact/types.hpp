#pragma once

#include <Eigen/Core>

namespace skelact {

/// Action-class identifier. Labels are nonnegative; kBackground marks frames
/// that belong to no action.
using Label = int;
inline constexpr Label kBackground = -1;

/// Discrete observation symbol (0-based codebook index).
using Symbol = int;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace skelact

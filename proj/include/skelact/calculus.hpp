#pragma once

// Five-frame window kinematics and moments.
//
// A window is a D x 5 matrix whose columns are the per-frame vectors at
// t-2, t-1, t, t+1, t+2. Every operation works componentwise on rows, so a
// single call handles all D coordinates of a pose.

#include <cmath>

#include <Eigen/Core>

#include "skelact/types.hpp"

namespace skelact {

template <typename Scalar>
using Window5 = Eigen::Matrix<Scalar, Eigen::Dynamic, 5>;

template <typename Scalar>
struct Calculus {
  VectorX<Scalar> velocity;
  VectorX<Scalar> acceleration;
  VectorX<Scalar> jerk;
};

template <typename Scalar>
struct Moments {
  VectorX<Scalar> mean;
  VectorX<Scalar> variance;
  VectorX<Scalar> skewness;
  VectorX<Scalar> kurtosis;
};

/// Variance below which skewness and kurtosis are reported as 0.
inline constexpr double kZeroVariance = 1e-12;

/// Five-point central differences at unit time step:
///   V = ( P[-2] - 8P[-1]          + 8P[+1] - P[+2]) / 12
///   A = (-P[-2] + 16P[-1] - 30P[0] + 16P[+1] - P[+2]) / 12
///   J = (-P[-2] + 2P[-1]           - 2P[+1] + P[+2]) / 2
/// The acceleration stencil uses -30 at the centre; a +30 centre tap would
/// not vanish on constant input.
template <typename Derived>
Calculus<typename Derived::Scalar> window_calculus(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  static_assert(Derived::ColsAtCompileTime == 5 || Derived::ColsAtCompileTime == Eigen::Dynamic);
  eigen_assert(w.cols() == 5);
  const auto m2 = w.col(0), m1 = w.col(1), c = w.col(2), p1 = w.col(3), p2 = w.col(4);
  Calculus<Scalar> out;
  // Symmetric taps are paired so constant input gives exactly zero.
  out.velocity = (Scalar(8) * (p1 - m1) - (p2 - m2)) / Scalar(12);
  out.acceleration = ((Scalar(16) * (m1 + p1) - (m2 + p2)) - Scalar(30) * c) / Scalar(12);
  out.jerk = ((p2 - m2) - Scalar(2) * (p1 - m1)) / Scalar(2);
  return out;
}

/// Population mean, variance, skewness m3/sigma^3 and kurtosis m4/sigma^4
/// of each row over its five samples.
template <typename Derived>
Moments<typename Derived::Scalar> window_stats(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  eigen_assert(w.cols() == 5);
  Moments<Scalar> out;
  out.mean = w.rowwise().mean();
  const MatrixX<Scalar> centered = w.colwise() - out.mean;
  const MatrixX<Scalar> sq = centered.array().square();
  out.variance = sq.rowwise().mean();
  const VectorX<Scalar> m3 = (sq.array() * centered.array()).rowwise().mean();
  const VectorX<Scalar> m4 = sq.array().square().rowwise().mean();
  const auto rows = w.rows();
  out.skewness.resize(rows);
  out.kurtosis.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Scalar var = out.variance[i];
    if (var < Scalar(kZeroVariance)) {
      out.skewness[i] = Scalar(0);
      out.kurtosis[i] = Scalar(0);
    } else {
      using std::sqrt;
      out.skewness[i] = m3[i] / (var * sqrt(var));
      out.kurtosis[i] = m4[i] / (var * var);
    }
  }
  return out;
}

}  // namespace skelact

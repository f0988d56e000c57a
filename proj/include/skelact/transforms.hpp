#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "skelact/error.hpp"
#include "skelact/types.hpp"

namespace skelact {

/// First min(keep, n) coefficients of the orthonormal DCT-II of x:
///   X[k] = s(k) * sum_i x[i] cos(pi (2i + 1) k / 2n),  s(0) = sqrt(1/n), s(k>0) = sqrt(2/n).
/// Inputs shorter than `keep` return the full transform without padding.
template <typename Derived>
VectorX<typename Derived::Scalar> dct_truncate(const Eigen::MatrixBase<Derived>& x,
                                               Eigen::Index keep) {
  using Scalar = typename Derived::Scalar;
  using std::cos;
  using std::sqrt;
  const Eigen::Index n = x.size();
  if (n == 0) throw Error("dct_truncate: empty input");
  if (keep < 1) throw Error("dct_truncate: keep must be >= 1");
  const Eigen::Index m = std::min(keep, n);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  VectorX<Scalar> out(m);
  out[0] = x.sum() * sqrt(Scalar(1) / Scalar(n));
  const Scalar scale = sqrt(Scalar(2) / Scalar(n));
  for (Eigen::Index k = 1; k < m; ++k) {
    Scalar acc(0);
    for (Eigen::Index i = 0; i < n; ++i)
      acc += x[i] * cos(pi * Scalar(2 * i + 1) * Scalar(k) / Scalar(2 * n));
    out[k] = scale * acc;
  }
  return out;
}

/// Average magnitude difference function of d at window length n:
///   out[k-1] = (1/n) * sum_{i=1..n} |d[i] - d[i+k]|   for k = 1 .. len(d) - n
/// (1-based indices on d, as in the usual definition).
template <typename Derived>
VectorX<typename Derived::Scalar> amdf(const Eigen::MatrixBase<Derived>& d, Eigen::Index n) {
  using Scalar = typename Derived::Scalar;
  if (n < 1) throw Error("amdf: n must be >= 1");
  const Eigen::Index len = d.size();
  if (len < n + 1)
    throw Error("amdf: vector of length " + std::to_string(len) + " is shorter than n + 1 = " +
                std::to_string(n + 1));
  VectorX<Scalar> out(len - n);
  for (Eigen::Index k = 1; k <= len - n; ++k)
    out[k - 1] = (d.head(n) - d.segment(k, n)).cwiseAbs().sum() / Scalar(n);
  return out;
}

}  // namespace skelact

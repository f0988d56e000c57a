#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "skelact/error.hpp"
#include "skelact/types.hpp"

namespace skelact {

inline constexpr double kDegenerateStd = 1e-12;

/// Per-dimension z-score map fitted on training rows.
template <typename Scalar>
struct Normalizer {
  VectorX<Scalar> means;
  VectorX<Scalar> stds;                  // population; degenerate dims hold 1
  Eigen::Matrix<bool, Eigen::Dynamic, 1> degenerate;

  Eigen::Index dimension() const { return means.size(); }
};

/// Rows are samples. Dimensions whose std falls below 1e-12 pass through
/// unscaled (std recorded as 1) and are flagged in `degenerate`.
template <typename Derived>
Normalizer<typename Derived::Scalar> fit_normalizer(const Eigen::MatrixBase<Derived>& rows) {
  using Scalar = typename Derived::Scalar;
  if (rows.rows() == 0 || rows.cols() == 0) throw Error("fit_normalizer: empty matrix");
  if (!rows.allFinite()) throw Error("fit_normalizer: non-finite input");
  Normalizer<Scalar> n;
  n.means = rows.colwise().mean().transpose();
  n.stds = ((rows.rowwise() - n.means.transpose()).array().square().colwise().mean().sqrt())
               .transpose();
  n.degenerate = (n.stds.array() < Scalar(kDegenerateStd)).matrix();
  for (Eigen::Index i = 0; i < n.stds.size(); ++i)
    if (n.degenerate[i]) n.stds[i] = Scalar(1);
  return n;
}

template <typename Scalar, typename Derived>
VectorX<Scalar> apply_normalizer(const Normalizer<Scalar>& n, const Eigen::MatrixBase<Derived>& v) {
  if (v.size() != n.dimension())
    throw Error("apply_normalizer: dimension " + std::to_string(v.size()) + " != " +
                std::to_string(n.dimension()));
  return (v.derived().template cast<Scalar>() - n.means).cwiseQuotient(n.stds);
}

/// Applies the normalizer to every row.
template <typename Scalar, typename Derived>
MatrixX<Scalar> apply_normalizer_rows(const Normalizer<Scalar>& n,
                                      const Eigen::MatrixBase<Derived>& rows) {
  if (rows.cols() != n.dimension())
    throw Error("apply_normalizer: dimension " + std::to_string(rows.cols()) + " != " +
                std::to_string(n.dimension()));
  return ((rows.rowwise() - n.means.transpose()).array().rowwise() / n.stds.transpose().array())
      .matrix();
}

template <typename Scalar, typename Derived>
VectorX<Scalar> invert_normalizer(const Normalizer<Scalar>& n, const Eigen::MatrixBase<Derived>& z) {
  if (z.size() != n.dimension()) throw Error("invert_normalizer: dimension mismatch");
  return z.cwiseProduct(n.stds) + n.means;
}

/// Principal axes of a training matrix. `components` holds every axis as a
/// column, ordered by nonincreasing eigenvalue; only the first `retained`
/// are used for projection.
template <typename Scalar>
struct PcaModel {
  VectorX<Scalar> mean;
  MatrixX<Scalar> components;
  VectorX<Scalar> eigenvalues;
  Eigen::Index retained = 0;

  Eigen::Index input_dimension() const { return mean.size(); }
  Eigen::Index output_dimension() const { return retained; }

  /// eigenvalue_i / sum(eigenvalues); zero vector when the data has no spread.
  VectorX<Scalar> explained_variance_ratio() const {
    const VectorX<Scalar> lam = eigenvalues.cwiseMax(Scalar(0));
    const Scalar total = lam.sum();
    if (total <= Scalar(0)) return VectorX<Scalar>::Zero(lam.size());
    return lam / total;
  }
};

/// Eigendecomposition of the population covariance of the centred rows.
/// Keeps the smallest m >= 1 whose cumulative variance share reaches
/// `variance_fraction`. Each component is signed so its largest-magnitude
/// entry is positive.
template <typename Derived>
PcaModel<typename Derived::Scalar> fit_pca(const Eigen::MatrixBase<Derived>& rows,
                                           double variance_fraction) {
  using Scalar = typename Derived::Scalar;
  if (rows.rows() < 2) throw Error("fit_pca: need at least 2 rows");
  if (!rows.allFinite()) throw Error("fit_pca: non-finite input");
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
    throw Error("fit_pca: variance_fraction must be in (0, 1]");

  PcaModel<Scalar> m;
  m.mean = rows.colwise().mean().transpose();
  const MatrixX<Scalar> centered = rows.rowwise() - m.mean.transpose();
  MatrixX<Scalar> cov = MatrixX<Scalar>::Zero(rows.cols(), rows.cols());
  cov.template selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  cov = cov.template selfadjointView<Eigen::Lower>();
  cov /= Scalar(rows.rows());

  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("fit_pca: eigendecomposition failed");

  // Eigen returns ascending eigenvalues; reverse to descending.
  const Eigen::Index d = cov.rows();
  m.eigenvalues = solver.eigenvalues().reverse();
  m.components = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::Index arg = 0;
    m.components.col(k).cwiseAbs().maxCoeff(&arg);
    if (m.components(arg, k) < Scalar(0)) m.components.col(k) *= Scalar(-1);
  }

  const VectorX<Scalar> lam = m.eigenvalues.cwiseMax(Scalar(0));
  const Scalar total = lam.sum();
  m.retained = d;
  if (total <= Scalar(0)) {
    m.retained = 1;
  } else {
    Scalar cum(0);
    for (Eigen::Index k = 0; k < d; ++k) {
      cum += lam[k];
      if (cum >= Scalar(variance_fraction) * total * (Scalar(1) - Scalar(1e-12))) {
        m.retained = k + 1;
        break;
      }
    }
  }
  return m;
}

template <typename Scalar, typename Derived>
VectorX<Scalar> project(const PcaModel<Scalar>& m, const Eigen::MatrixBase<Derived>& v) {
  if (v.size() != m.input_dimension())
    throw Error("pca project: dimension " + std::to_string(v.size()) + " != " +
                std::to_string(m.input_dimension()));
  return m.components.leftCols(m.retained).transpose() * (v.derived().template cast<Scalar>() - m.mean);
}

/// Projects every row; result has `retained` columns.
template <typename Scalar, typename Derived>
MatrixX<Scalar> project_rows(const PcaModel<Scalar>& m, const Eigen::MatrixBase<Derived>& rows) {
  if (rows.cols() != m.input_dimension())
    throw Error("pca project: dimension " + std::to_string(rows.cols()) + " != " +
                std::to_string(m.input_dimension()));
  return (rows.rowwise() - m.mean.transpose()) * m.components.leftCols(m.retained);
}

/// Maps retained coordinates back to the input space.
template <typename Scalar, typename Derived>
VectorX<Scalar> reconstruct(const PcaModel<Scalar>& m, const Eigen::MatrixBase<Derived>& coords) {
  if (coords.size() != m.retained) throw Error("pca reconstruct: dimension mismatch");
  return m.components.leftCols(m.retained) * coords + m.mean;
}

}  // namespace skelact

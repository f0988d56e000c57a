#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "skelact/error.hpp"
#include "skelact/types.hpp"

namespace skelact {

struct ApConfig {
  double damping = 0.9;
  int max_iterations = 500;
  int convergence_window = 50;
  /// Diagonal of the similarity matrix; nullopt means the median
  /// off-diagonal similarity.
  std::optional<double> preference;
  /// Upper bound on the number of training rows clustered; larger inputs are
  /// subsampled uniformly (seeded) before message passing.
  int max_rows = 3000;

  void validate() const {
    if (!(damping >= 0.5 && damping < 1.0)) throw Error("affinity propagation: damping must be in [0.5, 1)");
    if (max_iterations < 1) throw Error("affinity propagation: max_iterations must be >= 1");
    if (convergence_window < 1 || convergence_window >= max_iterations)
      throw Error("affinity propagation: convergence_window must be in [1, max_iterations)");
    if (preference && !std::isfinite(*preference))
      throw Error("affinity propagation: preference must be finite");
    if (max_rows < 1) throw Error("affinity propagation: max_rows must be >= 1");
  }
  friend bool operator==(const ApConfig&, const ApConfig&) = default;
};

/// Median of the off-diagonal entries (mean of the two middle values when
/// their count is even).
template <typename Derived>
typename Derived::Scalar median_off_diagonal(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = s.rows();
  if (n < 2) return Scalar(0);
  std::vector<Scalar> vals;
  vals.reserve(static_cast<std::size_t>(n * (n - 1)));
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != k) vals.push_back(s(i, k));
  const std::size_t mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid), vals.end());
  const Scalar hi = vals[mid];
  if (vals.size() % 2 == 1) return hi;
  const Scalar lo = *std::max_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / Scalar(2);
}

/// s(i,k) = -|x_i - x_k|^2 off the diagonal; the diagonal holds the
/// preference (median off-diagonal similarity when none is given).
template <typename Derived>
MatrixX<typename Derived::Scalar> similarity_matrix(const Eigen::MatrixBase<Derived>& rows,
                                                    std::optional<double> preference = std::nullopt) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = rows.rows();
  if (n < 1) throw Error("similarity_matrix: no rows");
  if (!rows.allFinite()) throw Error("similarity_matrix: non-finite rows");
  MatrixX<Scalar> s(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    s(k, k) = Scalar(0);
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const Scalar v = -(rows.row(i) - rows.row(k)).squaredNorm();
      s(i, k) = v;
      s(k, i) = v;
    }
  }
  const Scalar pref = preference ? Scalar(*preference) : median_off_diagonal(s);
  s.diagonal().setConstant(pref);
  return s;
}

struct ApResult {
  std::vector<int> exemplars;  // row indices, ascending
  std::vector<int> labels;     // per row: index into `exemplars`
  int iterations = 0;
  bool converged = false;
};

namespace detail {

template <typename Derived>
bool equal_similarities_and_preferences(const Eigen::MatrixBase<Derived>& s) {
  const Eigen::Index n = s.rows();
  const auto off = s(1, 0);
  const auto pref = s(0, 0);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      if (i == k ? s(i, k) != pref : s(i, k) != off) return false;
  return true;
}

template <typename Derived>
std::vector<int> label_rows(const Eigen::MatrixBase<Derived>& s, const std::vector<int>& exemplars) {
  const Eigen::Index n = s.rows();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    for (std::size_t e = 0; e < exemplars.size(); ++e) {
      if (exemplars[e] == i) {
        best = static_cast<int>(e);
        break;
      }
      if (s(i, exemplars[e]) > s(i, exemplars[best])) best = static_cast<int>(e);
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

}  // namespace detail

/// Affinity propagation message passing on a precomputed similarity matrix.
///
/// Responsibilities and availabilities are updated with damping until the
/// exemplar set {k : r(k,k) + a(k,k) > 0} is unchanged for
/// `convergence_window` consecutive iterations, or `max_iterations` is hit.
/// A fixed-seed perturbation of order machine epsilon breaks exact ties, so
/// results are reproducible. A final refinement pass moves each exemplar to
/// the cluster member with the largest summed similarity to its cluster.
/// Each row is labelled with its most similar exemplar; exemplars label
/// themselves.
template <typename Derived>
ApResult affinity_propagation(const Eigen::MatrixBase<Derived>& s_in, const ApConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  cfg.validate();
  const Eigen::Index n = s_in.rows();
  if (n == 0 || s_in.cols() != n) throw Error("affinity_propagation: similarity matrix must be square and nonempty");
  if (!s_in.allFinite()) throw Error("affinity_propagation: non-finite similarity");

  ApResult out;
  if (n == 1) {
    out.exemplars = {0};
    out.labels = {0};
    out.converged = true;
    return out;
  }
  if (detail::equal_similarities_and_preferences(s_in)) {
    // Every split has the same net similarity; pick the extreme that the
    // preference favours.
    if (s_in(0, 0) > s_in(1, 0)) {
      for (int i = 0; i < n; ++i) {
        out.exemplars.push_back(i);
        out.labels.push_back(i);
      }
    } else {
      out.exemplars = {0};
      out.labels.assign(static_cast<std::size_t>(n), 0);
    }
    out.converged = true;
    return out;
  }

  MatrixX<Scalar> s = s_in;
  {
    std::mt19937_64 rng(0);
    std::normal_distribution<double> noise;
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    const Scalar tiny = std::numeric_limits<Scalar>::min() * Scalar(100);
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index i = 0; i < n; ++i) s(i, k) += (eps * s(i, k) + tiny) * Scalar(noise(rng));
  }

  const Scalar lambda = Scalar(cfg.damping);
  const Scalar keep = Scalar(1) - lambda;
  MatrixX<Scalar> r = MatrixX<Scalar>::Zero(n, n);
  MatrixX<Scalar> a = MatrixX<Scalar>::Zero(n, n);
  VectorX<Scalar> max1(n), max2(n);
  Eigen::VectorXi arg(n);
  std::vector<char> mask(static_cast<std::size_t>(n), 0), prev(static_cast<std::size_t>(n), 0);
  int unchanged = 0;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    // r(i,k) <- s(i,k) - max_{k' != k} (a(i,k') + s(i,k'))
    max1.setConstant(-std::numeric_limits<Scalar>::infinity());
    max2.setConstant(-std::numeric_limits<Scalar>::infinity());
    arg.setZero();
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar v = a(i, k) + s(i, k);
        if (v > max1[i]) {
          max2[i] = max1[i];
          max1[i] = v;
          arg[i] = static_cast<int>(k);
        } else if (v > max2[i]) {
          max2[i] = v;
        }
      }
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar competitor = (arg[i] == k) ? max2[i] : max1[i];
        r(i, k) = lambda * r(i, k) + keep * (s(i, k) - competitor);
      }

    // a(i,k) <- min(0, r(k,k) + sum_{i' not in {i,k}} max(0, r(i',k)))
    // a(k,k) <- sum_{i' != k} max(0, r(i',k))
    for (Eigen::Index k = 0; k < n; ++k) {
      Scalar pos_sum(0);
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != k) pos_sum += std::max(r(i, k), Scalar(0));
      const Scalar rkk = r(k, k);
      for (Eigen::Index i = 0; i < n; ++i) {
        Scalar target;
        if (i == k)
          target = pos_sum;
        else
          target = std::min(Scalar(0), rkk + pos_sum - std::max(r(i, k), Scalar(0)));
        a(i, k) = lambda * a(i, k) + keep * target;
      }
    }

    int count = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
      mask[static_cast<std::size_t>(k)] = (a(k, k) + r(k, k)) > Scalar(0);
      count += mask[static_cast<std::size_t>(k)];
    }
    unchanged = (it > 0 && mask == prev) ? unchanged + 1 : 0;
    prev = mask;
    out.iterations = it + 1;
    if (count > 0 && unchanged + 1 >= cfg.convergence_window) {
      out.converged = true;
      break;
    }
  }

  for (Eigen::Index k = 0; k < n; ++k)
    if (prev[static_cast<std::size_t>(k)]) out.exemplars.push_back(static_cast<int>(k));
  if (out.exemplars.empty())
    throw Error("affinity_propagation: no exemplar emerged; raise the preference");

  // Refinement: within each cluster, the member with the largest summed
  // similarity to the others (diagonal included) becomes the exemplar.
  const std::vector<int> first = detail::label_rows(s, out.exemplars);
  std::vector<int> refined;
  for (std::size_t e = 0; e < out.exemplars.size(); ++e) {
    int best = out.exemplars[e];
    Scalar best_sum = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (first[static_cast<std::size_t>(k)] != static_cast<int>(e)) continue;
      Scalar sum(0);
      for (Eigen::Index i = 0; i < n; ++i)
        if (first[static_cast<std::size_t>(i)] == static_cast<int>(e)) sum += s(i, k);
      if (sum > best_sum) {
        best_sum = sum;
        best = static_cast<int>(k);
      }
    }
    refined.push_back(best);
  }
  std::sort(refined.begin(), refined.end());
  out.exemplars = refined;
  out.labels = detail::label_rows(s_in, out.exemplars);
  return out;
}

/// Exemplar vectors, one per row; symbol k is row k.
template <typename Scalar>
struct Codebook {
  MatrixX<Scalar> exemplars;

  int size() const { return static_cast<int>(exemplars.rows()); }
  Eigen::Index dimension() const { return exemplars.cols(); }
};

/// Nearest exemplar by Euclidean distance; ties go to the lowest index.
template <typename Scalar, typename Derived>
Symbol assign_symbol(const Codebook<Scalar>& cb, const Eigen::MatrixBase<Derived>& v) {
  if (cb.size() == 0) throw Error("assign_symbol: empty codebook");
  if (v.size() != cb.dimension())
    throw Error("assign_symbol: dimension " + std::to_string(v.size()) + " != " +
                std::to_string(cb.dimension()));
  Symbol best = 0;
  Scalar best_d = std::numeric_limits<Scalar>::infinity();
  for (int k = 0; k < cb.size(); ++k) {
    const Scalar d = (cb.exemplars.row(k).transpose() - v.derived().template cast<Scalar>()).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

/// Sorted indices of a uniform sample of `cap` rows out of `n` (all rows when
/// n <= cap).
inline std::vector<Eigen::Index> subsample_indices(Eigen::Index n, Eigen::Index cap,
                                                   std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (n <= cap) return idx;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates with a fixed draw sequence.
  for (Eigen::Index i = 0; i < cap; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(cap));
  std::sort(idx.begin(), idx.end());
  return idx;
}

template <typename Scalar>
struct CodebookFit {
  Codebook<Scalar> codebook;
  std::vector<Eigen::Index> clustered_rows;  // rows of the input that were clustered
  ApResult clustering;
};

/// Subsample (if needed), build similarities, run affinity propagation and
/// collect the exemplar rows.
template <typename Derived>
CodebookFit<typename Derived::Scalar> fit_codebook(const Eigen::MatrixBase<Derived>& rows,
                                                   const ApConfig& cfg, std::uint64_t seed) {
  using Scalar = typename Derived::Scalar;
  cfg.validate();
  if (rows.rows() == 0) throw Error("fit_codebook: no rows");
  CodebookFit<Scalar> fit;
  fit.clustered_rows = subsample_indices(rows.rows(), cfg.max_rows, seed);
  MatrixX<Scalar> sample(static_cast<Eigen::Index>(fit.clustered_rows.size()), rows.cols());
  for (std::size_t i = 0; i < fit.clustered_rows.size(); ++i)
    sample.row(static_cast<Eigen::Index>(i)) = rows.row(fit.clustered_rows[i]);
  fit.clustering = affinity_propagation(similarity_matrix(sample, cfg.preference), cfg);
  fit.codebook.exemplars.resize(static_cast<Eigen::Index>(fit.clustering.exemplars.size()), rows.cols());
  for (std::size_t e = 0; e < fit.clustering.exemplars.size(); ++e)
    fit.codebook.exemplars.row(static_cast<Eigen::Index>(e)) = sample.row(fit.clustering.exemplars[e]);
  return fit;
}

}  // namespace skelact

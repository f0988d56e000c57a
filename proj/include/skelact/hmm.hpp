#pragma once

// Discrete-observation hidden Markov models.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "skelact/error.hpp"
#include "skelact/types.hpp"

namespace skelact {

using SymbolSequence = std::vector<Symbol>;

enum class HmmTopology { Ergodic, LeftToRight };

inline constexpr double kStochasticTolerance = 1e-9;

template <typename Scalar>
struct DiscreteHmm {
  VectorX<Scalar> initial;     // S
  MatrixX<Scalar> transition;  // S x S, rows sum to 1
  MatrixX<Scalar> emission;    // S x M, rows sum to 1
  Label label = 0;

  int states() const { return static_cast<int>(initial.size()); }
  int symbols() const { return static_cast<int>(emission.cols()); }

  /// Throws Error when shapes disagree or any distribution is not
  /// stochastic within `tol`.
  void validate(double tol = kStochasticTolerance) const {
    const auto s = initial.size();
    if (s < 1) throw Error("hmm: no states");
    if (transition.rows() != s || transition.cols() != s || emission.rows() != s || emission.cols() < 1)
      throw Error("hmm: inconsistent table shapes");
    auto check = [&](const auto& v, const char* what) {
      if (!v.allFinite() || (v.array() < Scalar(0)).any())
        throw Error(std::string("hmm: ") + what + " has negative or non-finite entries");
    };
    check(initial, "initial");
    check(transition, "transition");
    check(emission, "emission");
    using std::abs;
    if (abs(initial.sum() - Scalar(1)) > Scalar(tol)) throw Error("hmm: initial does not sum to 1");
    for (Eigen::Index i = 0; i < s; ++i) {
      if (abs(transition.row(i).sum() - Scalar(1)) > Scalar(tol))
        throw Error("hmm: transition row " + std::to_string(i) + " does not sum to 1");
      if (abs(emission.row(i).sum() - Scalar(1)) > Scalar(tol))
        throw Error("hmm: emission row " + std::to_string(i) + " does not sum to 1");
    }
  }
};

namespace detail {

template <typename Scalar>
void check_symbols(const DiscreteHmm<Scalar>& m, std::span<const Symbol> obs) {
  if (obs.empty()) throw Error("hmm: empty observation sequence");
  for (std::size_t t = 0; t < obs.size(); ++t)
    if (obs[t] < 0 || obs[t] >= m.symbols())
      throw Error("hmm: symbol " + std::to_string(obs[t]) + " at position " + std::to_string(t) +
                  " outside alphabet of size " + std::to_string(m.symbols()));
}

template <typename Scalar>
Scalar neg_inf() {
  return -std::numeric_limits<Scalar>::infinity();
}

/// Scaled forward pass. alpha(:,t) sums to 1, scale[t] is the normaliser.
/// Returns log P(obs), or -inf (leaving alpha partially filled) when some
/// prefix has probability zero.
template <typename Scalar>
Scalar forward_scaled(const DiscreteHmm<Scalar>& m, std::span<const Symbol> obs,
                      MatrixX<Scalar>& alpha, VectorX<Scalar>& scale) {
  using std::log;
  const auto s = m.states();
  const auto len = static_cast<Eigen::Index>(obs.size());
  alpha.resize(s, len);
  scale.resize(len);
  Scalar ll(0);
  for (Eigen::Index t = 0; t < len; ++t) {
    if (t == 0)
      alpha.col(0) = m.initial.cwiseProduct(m.emission.col(obs[0]));
    else
      alpha.col(t) = (m.transition.transpose() * alpha.col(t - 1)).cwiseProduct(m.emission.col(obs[t]));
    const Scalar c = alpha.col(t).sum();
    if (!(c > Scalar(0))) return neg_inf<Scalar>();
    alpha.col(t) /= c;
    scale[t] = c;
    ll += log(c);
  }
  return ll;
}

/// Backward pass sharing the forward scale factors.
template <typename Scalar>
void backward_scaled(const DiscreteHmm<Scalar>& m, std::span<const Symbol> obs,
                     const VectorX<Scalar>& scale, MatrixX<Scalar>& beta) {
  const auto len = static_cast<Eigen::Index>(obs.size());
  beta.resize(m.states(), len);
  beta.col(len - 1).setOnes();
  for (Eigen::Index t = len - 2; t >= 0; --t)
    beta.col(t) = m.transition * m.emission.col(obs[t + 1]).cwiseProduct(beta.col(t + 1)) / scale[t + 1];
}

}  // namespace detail

/// log P(obs | m) by the scaled forward recursion; exactly -inf when the
/// sequence is impossible under the model.
template <typename Scalar>
Scalar forward_log_likelihood(const DiscreteHmm<Scalar>& m, std::span<const Symbol> obs) {
  detail::check_symbols(m, obs);
  MatrixX<Scalar> alpha;
  VectorX<Scalar> scale;
  return detail::forward_scaled(m, obs, alpha, scale);
}

template <typename Scalar>
struct ViterbiPath {
  std::vector<int> states;
  Scalar log_probability;
};

/// Most probable state path, computed in log space. Ties prefer the lower
/// state index. Throws ZeroProbabilityError when every path is impossible.
template <typename Scalar>
ViterbiPath<Scalar> viterbi(const DiscreteHmm<Scalar>& m, std::span<const Symbol> obs) {
  using std::log;
  detail::check_symbols(m, obs);
  const int s = m.states();
  const auto len = static_cast<Eigen::Index>(obs.size());
  const MatrixX<Scalar> log_a = m.transition.array().log().matrix();
  const MatrixX<Scalar> log_b = m.emission.array().log().matrix();
  const VectorX<Scalar> log_pi = m.initial.array().log().matrix();

  MatrixX<Scalar> delta(s, len);
  Eigen::MatrixXi back(s, len);
  delta.col(0) = log_pi + log_b.col(obs[0]);
  back.col(0).setZero();
  for (Eigen::Index t = 1; t < len; ++t) {
    for (int j = 0; j < s; ++j) {
      Scalar best = detail::neg_inf<Scalar>();
      int arg = 0;
      for (int i = 0; i < s; ++i) {
        const Scalar v = delta(i, t - 1) + log_a(i, j);
        if (v > best) {
          best = v;
          arg = i;
        }
      }
      delta(j, t) = best + log_b(j, obs[t]);
      back(j, t) = arg;
    }
  }
  Scalar best = detail::neg_inf<Scalar>();
  int arg = 0;
  for (int i = 0; i < s; ++i)
    if (delta(i, len - 1) > best) {
      best = delta(i, len - 1);
      arg = i;
    }
  if (best == detail::neg_inf<Scalar>())
    throw ZeroProbabilityError("viterbi: every state path has probability zero");

  ViterbiPath<Scalar> out;
  out.log_probability = best;
  out.states.resize(obs.size());
  out.states[static_cast<std::size_t>(len - 1)] = arg;
  for (Eigen::Index t = len - 1; t > 0; --t) {
    arg = back(arg, t);
    out.states[static_cast<std::size_t>(t - 1)] = arg;
  }
  return out;
}

template <typename Scalar>
struct BaumWelchOptions {
  int max_iterations = 100;
  double tolerance = 1e-4;  // total log-likelihood, nats
  /// Added to every emission probability after each M-step before
  /// renormalising; 0 disables.
  double smoothing = 1e-6;
  /// Called after every M-step with the 1-based iteration and new model.
  std::function<void(int, const DiscreteHmm<Scalar>&)> observer;
};

template <typename Scalar>
struct BaumWelchResult {
  DiscreteHmm<Scalar> model;
  /// Total log-likelihood of every evaluated parameter set, in order; the
  /// last entry belongs to `model`.
  std::vector<Scalar> log_likelihoods;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

template <typename Scalar>
struct EmAccumulator {
  VectorX<Scalar> initial;
  MatrixX<Scalar> transition;
  MatrixX<Scalar> emission;
  std::size_t sequences = 0;

  EmAccumulator(int s, int m)
      : initial(VectorX<Scalar>::Zero(s)),
        transition(MatrixX<Scalar>::Zero(s, s)),
        emission(MatrixX<Scalar>::Zero(s, m)) {}
};

template <typename Scalar>
Scalar expectation(const DiscreteHmm<Scalar>& m, std::span<const SymbolSequence> data,
                   EmAccumulator<Scalar>& acc, double smoothing) {
  MatrixX<Scalar> alpha, beta;
  VectorX<Scalar> scale;
  Scalar total(0);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const std::span<const Symbol> obs(data[n]);
    const Scalar ll = forward_scaled(m, obs, alpha, scale);
    if (ll == neg_inf<Scalar>())
      throw ZeroProbabilityError(
          "baum_welch: sequence " + std::to_string(n) + " has probability zero under the model" +
          (smoothing > 0 ? std::string() : std::string("; enable emission smoothing")));
    total += ll;
    backward_scaled(m, obs, scale, beta);
    const auto len = static_cast<Eigen::Index>(obs.size());
    for (Eigen::Index t = 0; t < len; ++t) {
      VectorX<Scalar> gamma = alpha.col(t).cwiseProduct(beta.col(t));
      gamma /= gamma.sum();
      if (t == 0) acc.initial += gamma;
      acc.emission.col(obs[static_cast<std::size_t>(t)]) += gamma;
      if (t + 1 < len) {
        const VectorX<Scalar> next =
            m.emission.col(obs[static_cast<std::size_t>(t + 1)]).cwiseProduct(beta.col(t + 1)) / scale[t + 1];
        acc.transition += (alpha.col(t) * next.transpose()).cwiseProduct(m.transition);
      }
    }
    ++acc.sequences;
  }
  return total;
}

template <typename Scalar>
void normalize_rows_or_keep(MatrixX<Scalar>& target, const MatrixX<Scalar>& counts) {
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    const Scalar z = counts.row(i).sum();
    if (z > Scalar(0)) target.row(i) = counts.row(i) / z;
  }
}

template <typename Scalar>
DiscreteHmm<Scalar> maximization(const DiscreteHmm<Scalar>& m, const EmAccumulator<Scalar>& acc,
                                 double smoothing) {
  DiscreteHmm<Scalar> out = m;
  out.initial = acc.initial / acc.initial.sum();
  normalize_rows_or_keep(out.transition, acc.transition);
  normalize_rows_or_keep(out.emission, acc.emission);
  if (smoothing > 0) {
    out.emission.array() += Scalar(smoothing);
    for (Eigen::Index i = 0; i < out.emission.rows(); ++i)
      out.emission.row(i) /= out.emission.row(i).sum();
  }
  return out;
}

}  // namespace detail

/// Multi-sequence Baum-Welch with per-step scaling. Stops once the total
/// log-likelihood improves by less than `tolerance` or after
/// `max_iterations` M-steps.
template <typename Scalar>
BaumWelchResult<Scalar> baum_welch(const DiscreteHmm<Scalar>& init,
                                   std::span<const SymbolSequence> data,
                                   const BaumWelchOptions<Scalar>& opts = {}) {
  init.validate();
  if (data.empty()) throw Error("baum_welch: no training sequences");
  for (const auto& seq : data) detail::check_symbols(init, std::span<const Symbol>(seq));
  if (opts.smoothing < 0) throw Error("baum_welch: smoothing must be >= 0");

  BaumWelchResult<Scalar> res;
  res.model = init;
  for (int it = 0;; ++it) {
    detail::EmAccumulator<Scalar> acc(init.states(), init.symbols());
    const Scalar ll = detail::expectation(res.model, data, acc, opts.smoothing);
    res.log_likelihoods.push_back(ll);
    if (it > 0 && ll - res.log_likelihoods[static_cast<std::size_t>(it - 1)] < Scalar(opts.tolerance)) {
      res.converged = true;
      break;
    }
    if (it == opts.max_iterations) break;
    res.model = detail::maximization(res.model, acc, opts.smoothing);
    res.iterations = it + 1;
    if (opts.observer) opts.observer(res.iterations, res.model);
  }
  return res;
}

template <typename Scalar>
struct Classification {
  std::optional<Label> label;  // nullopt: every model gives probability zero
  std::vector<Scalar> log_likelihoods;
};

/// Maximum-likelihood label among `models`; ties go to the lowest label.
template <typename Scalar>
Classification<Scalar> classify(std::span<const DiscreteHmm<Scalar>> models,
                                std::span<const Symbol> obs) {
  if (models.empty()) throw Error("classify: no models");
  const int m = models.front().symbols();
  Classification<Scalar> out;
  Scalar best = detail::neg_inf<Scalar>();
  for (const auto& model : models) {
    if (model.symbols() != m) throw Error("classify: models disagree on alphabet size");
    const Scalar ll = forward_log_likelihood(model, obs);
    out.log_likelihoods.push_back(ll);
    if (ll == detail::neg_inf<Scalar>()) continue;
    if (!out.label || ll > best || (ll == best && model.label < *out.label)) {
      best = ll;
      out.label = model.label;
    }
  }
  return out;
}

/// Random starting point: initial and transition rows from a flat
/// Dirichlet, emission rows from `symbol_frequency` plus Dirichlet noise.
/// Left-to-right models start in state 0 and only move i -> i or i -> i+1.
template <typename Scalar, typename Rng>
DiscreteHmm<Scalar> random_hmm(int states, int symbols, Rng& rng,
                               HmmTopology topology = HmmTopology::Ergodic,
                               const VectorX<Scalar>* symbol_frequency = nullptr) {
  if (states < 1 || symbols < 1) throw Error("random_hmm: need at least one state and symbol");
  std::gamma_distribution<double> gamma(1.0, 1.0);
  auto dirichlet = [&](Eigen::Index n) {
    VectorX<Scalar> v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = Scalar(gamma(rng)) + Scalar(1e-12);
    return VectorX<Scalar>(v / v.sum());
  };
  DiscreteHmm<Scalar> m;
  m.transition.resize(states, states);
  m.emission.resize(states, symbols);
  if (topology == HmmTopology::Ergodic) {
    m.initial = dirichlet(states);
    for (int i = 0; i < states; ++i) m.transition.row(i) = dirichlet(states).transpose();
  } else {
    m.initial = VectorX<Scalar>::Zero(states);
    m.initial[0] = Scalar(1);
    m.transition.setZero();
    for (int i = 0; i < states; ++i) {
      if (i + 1 < states) {
        const VectorX<Scalar> d = dirichlet(2);
        m.transition(i, i) = d[0];
        m.transition(i, i + 1) = d[1];
      } else {
        m.transition(i, i) = Scalar(1);
      }
    }
  }
  for (int i = 0; i < states; ++i) {
    VectorX<Scalar> row = dirichlet(symbols);
    if (symbol_frequency) row = *symbol_frequency + Scalar(0.5) * row;
    m.emission.row(i) = (row / row.sum()).transpose();
  }
  return m;
}

/// Draws a state path and symbol sequence of the given length.
template <typename Scalar, typename Rng>
std::pair<std::vector<int>, SymbolSequence> sample(const DiscreteHmm<Scalar>& m, int length, Rng& rng) {
  auto draw = [&](const auto& probs) {
    std::vector<double> w(static_cast<std::size_t>(probs.size()));
    for (Eigen::Index i = 0; i < probs.size(); ++i) w[static_cast<std::size_t>(i)] = double(probs[i]);
    std::discrete_distribution<int> dist(w.begin(), w.end());
    return dist(rng);
  };
  std::vector<int> states;
  SymbolSequence symbols;
  int s = draw(m.initial);
  for (int t = 0; t < length; ++t) {
    if (t > 0) s = draw(m.transition.row(s));
    states.push_back(s);
    symbols.push_back(draw(m.emission.row(s)));
  }
  return {std::move(states), std::move(symbols)};
}

template <typename Scalar>
struct HmmTrainingLog {
  int restart = 0;
  std::vector<Scalar> log_likelihoods;
};

template <typename Scalar>
struct TrainedHmm {
  DiscreteHmm<Scalar> model;
  std::vector<HmmTrainingLog<Scalar>> logs;  // one per restart
  int best_restart = 0;
};

/// Runs Baum-Welch from `restarts` random initialisations and keeps the one
/// with the highest final total log-likelihood (earliest on ties).
template <typename Scalar, typename Rng>
TrainedHmm<Scalar> train_hmm(std::span<const SymbolSequence> data, int states, int symbols,
                             int restarts, HmmTopology topology,
                             const BaumWelchOptions<Scalar>& opts, Rng& rng) {
  if (data.empty()) throw Error("train_hmm: no training sequences");
  if (restarts < 1) throw Error("train_hmm: restarts must be >= 1");
  VectorX<Scalar> freq = VectorX<Scalar>::Zero(symbols);
  for (const auto& seq : data)
    for (Symbol o : seq) {
      if (o < 0 || o >= symbols) throw Error("train_hmm: symbol out of range");
      freq[o] += Scalar(1);
    }
  freq /= freq.sum();

  TrainedHmm<Scalar> out;
  Scalar best = detail::neg_inf<Scalar>();
  for (int r = 0; r < restarts; ++r) {
    const auto init = random_hmm<Scalar>(states, symbols, rng, topology, &freq);
    auto res = baum_welch(init, data, opts);
    const Scalar final_ll = res.log_likelihoods.back();
    out.logs.push_back({r, res.log_likelihoods});
    if (r == 0 || final_ll > best) {
      best = final_ll;
      out.model = std::move(res.model);
      out.best_restart = r;
    }
  }
  return out;
}

}  // namespace skelact

#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Core>

#include "skelact/hmm.hpp"
#include "skelact/skeleton.hpp"

namespace skelact::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1,
                                     double hi = 1) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

/// Random tree: joint i > 0 hangs off a uniformly chosen earlier joint.
inline TopologyPtr random_topology(Rng& rng, int joints) {
  std::vector<std::string> names;
  for (int j = 0; j < joints; ++j) names.push_back("j" + std::to_string(j));
  std::vector<std::pair<std::string, std::string>> bones;
  for (int j = 1; j < joints; ++j) bones.push_back({names[static_cast<std::size_t>(uniform_int(rng, 0, j - 1))], names[static_cast<std::size_t>(j)]});
  return std::make_shared<const SkeletonTopology>("random" + std::to_string(joints), names, bones);
}

inline ActionSequence random_sequence(Rng& rng, TopologyPtr topo, int frames, double spread = 1.0) {
  ActionSequence s;
  s.topology = topo;
  for (int f = 0; f < frames; ++f)
    s.frames.push_back({random_matrix(rng, 3, topo->joint_count(), -spread, spread), f});
  return s;
}

/// Joints n0 -> n1 -> ... in a single chain.
inline TopologyPtr chain_topology(int joints) {
  std::vector<std::string> names;
  std::vector<std::pair<std::string, std::string>> bones;
  for (int j = 0; j < joints; ++j) {
    names.push_back("n" + std::to_string(j));
    if (j > 0) bones.push_back({names[static_cast<std::size_t>(j - 1)], names[static_cast<std::size_t>(j)]});
  }
  return std::make_shared<const SkeletonTopology>("chain" + std::to_string(joints), names, bones);
}

inline ActionSequence sequence_of(TopologyPtr topo, const std::vector<Eigen::Matrix3Xd>& frames) {
  ActionSequence s;
  s.topology = topo;
  for (std::size_t f = 0; f < frames.size(); ++f) s.frames.push_back({frames[f], static_cast<std::int64_t>(f)});
  return s;
}

/// Calls f(path) for every state path of the given length.
template <typename F>
void for_each_path(int states, int length, F&& f) {
  std::vector<int> path(static_cast<std::size_t>(length), 0);
  while (true) {
    f(path);
    int t = length - 1;
    while (t >= 0 && ++path[static_cast<std::size_t>(t)] == states) path[static_cast<std::size_t>(t--)] = 0;
    if (t < 0) return;
  }
}

inline double path_log_prob(const DiscreteHmm<double>& m, const std::vector<int>& path, const SymbolSequence& obs) {
  double lp = std::log(m.initial[path[0]]) + std::log(m.emission(path[0], obs[0]));
  for (std::size_t t = 1; t < obs.size(); ++t)
    lp += std::log(m.transition(path[t - 1], path[t])) + std::log(m.emission(path[t], obs[t]));
  return lp;
}

/// log P(obs) by summing over every state path.
inline double brute_forward(const DiscreteHmm<double>& m, const SymbolSequence& obs) {
  long double total = 0;
  for_each_path(m.states(), static_cast<int>(obs.size()), [&](const std::vector<int>& p) {
    total += std::exp(static_cast<long double>(path_log_prob(m, p, obs)));
  });
  return static_cast<double>(std::log(total));
}

/// Best path log-probability by exhaustive search.
inline double brute_viterbi(const DiscreteHmm<double>& m, const SymbolSequence& obs, std::vector<int>* best_path) {
  double best = -std::numeric_limits<double>::infinity();
  for_each_path(m.states(), static_cast<int>(obs.size()), [&](const std::vector<int>& p) {
    const double lp = path_log_prob(m, p, obs);
    if (lp > best) {
      best = lp;
      if (best_path) *best_path = p;
    }
  });
  return best;
}

/// AP's net similarity of an exemplar set: preferences of the exemplars plus
/// each other point's similarity to its best exemplar.
inline double net_similarity(const Eigen::MatrixXd& s, const std::vector<int>& exemplars) {
  double net = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    bool is_exemplar = false;
    for (int e : exemplars) is_exemplar |= (e == i);
    if (is_exemplar) {
      net += s(i, i);
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int e : exemplars) best = std::max(best, s(i, e));
    net += best;
  }
  return net;
}

/// Exemplar set maximising net similarity over every nonempty subset.
inline std::vector<int> brute_force_exemplars(const Eigen::MatrixXd& s) {
  const int n = static_cast<int>(s.rows());
  std::vector<int> best_set;
  double best = -std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> set;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) set.push_back(i);
    const double v = net_similarity(s, set);
    if (v > best) {
      best = v;
      best_set = set;
    }
  }
  return best_set;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("skelact_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace skelact::test

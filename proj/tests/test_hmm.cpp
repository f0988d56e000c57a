#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "skelact/hmm.hpp"
#include "support.hpp"

using namespace skelact;
using namespace skelact::test;

namespace {

using Hmm = DiscreteHmm<double>;

SymbolSequence random_symbols(Rng& rng, int length, int symbols) {
  SymbolSequence s(static_cast<std::size_t>(length));
  for (auto& o : s) o = uniform_int(rng, 0, symbols - 1);
  return s;
}

Hmm permuted(const Hmm& m, const std::vector<int>& perm) {
  Hmm out = m;
  const int s = m.states();
  for (int i = 0; i < s; ++i) {
    out.initial[perm[static_cast<std::size_t>(i)]] = m.initial[i];
    out.emission.row(perm[static_cast<std::size_t>(i)]) = m.emission.row(i);
    for (int j = 0; j < s; ++j) out.transition(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = m.transition(i, j);
  }
  return out;
}

/// Two well-separated 2-state generators over 4 symbols.
Hmm generator(int which) {
  Hmm m;
  m.initial = Eigen::Vector2d(0.6, 0.4);
  m.transition.resize(2, 2);
  m.emission.resize(2, 4);
  if (which == 0) {
    m.transition << 0.9, 0.1, 0.2, 0.8;
    m.emission << 0.7, 0.1, 0.1, 0.1, 0.1, 0.7, 0.1, 0.1;
  } else {
    m.transition << 0.5, 0.5, 0.5, 0.5;
    m.emission << 0.1, 0.1, 0.7, 0.1, 0.1, 0.1, 0.1, 0.7;
  }
  m.label = which;
  return m;
}

double total_ll(const Hmm& m, const std::vector<SymbolSequence>& data) {
  double t = 0;
  for (const auto& s : data) t += forward_log_likelihood(m, std::span<const Symbol>(s));
  return t;
}

}  // namespace

TEST_CASE("forward examples") {
  Hmm one{Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Constant(1, 2, 0.5)};
  const SymbolSequence obs{0, 0, 0};
  CHECK(forward_log_likelihood(one, std::span<const Symbol>(obs)) == doctest::Approx(std::log(0.125)).epsilon(1e-14));

  Hmm impossible = one;
  impossible.emission << 1, 0;
  const SymbolSequence bad{0, 1};
  CHECK(forward_log_likelihood(impossible, std::span<const Symbol>(bad)) == -std::numeric_limits<double>::infinity());
  const SymbolSequence out_of_range{2};
  CHECK_THROWS_AS(forward_log_likelihood(one, std::span<const Symbol>(out_of_range)), Error);
  CHECK_THROWS_AS(forward_log_likelihood(one, std::span<const Symbol>()), Error);
}

TEST_CASE("forward matches path enumeration") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int s = uniform_int(rng, 1, 3), m = uniform_int(rng, 1, 4), len = uniform_int(rng, 1, 6);
    const auto model = random_hmm<double>(s, m, rng);
    const auto obs = random_symbols(rng, len, m);
    CHECK(std::abs(forward_log_likelihood(model, std::span<const Symbol>(obs)) - brute_forward(model, obs)) <= 1e-10);
  }
}

TEST_CASE("forward is invariant under state relabelling") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const int s = uniform_int(rng, 2, 5);
    const auto model = random_hmm<double>(s, 6, rng);
    std::vector<int> perm(static_cast<std::size_t>(s));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto obs = random_symbols(rng, 40, 6);
    const std::span<const Symbol> o(obs);
    CHECK(std::abs(forward_log_likelihood(model, o) - forward_log_likelihood(permuted(model, perm), o)) <= 1e-9);
  }
}

TEST_CASE("forward stays finite where the raw probability underflows") {
  Rng rng(3);
  const auto model = random_hmm<double>(3, 20, rng);
  const auto obs = random_symbols(rng, 1000, 20);
  const double ll = forward_log_likelihood(model, std::span<const Symbol>(obs));
  CHECK(std::isfinite(ll));
  CHECK(ll < std::log(std::numeric_limits<double>::min()));
}

TEST_CASE("viterbi examples") {
  Hmm chain;
  chain.initial = Eigen::Vector3d(1, 0, 0);
  chain.transition.resize(3, 3);
  chain.transition << 0, 1, 0, 0, 0, 1, 0, 0, 1;
  chain.emission = Eigen::MatrixXd::Identity(3, 3);
  const SymbolSequence obs{0, 1, 2, 2};
  const auto p = viterbi(chain, std::span<const Symbol>(obs));
  CHECK(p.states == std::vector<int>{0, 1, 2, 2});
  CHECK(p.log_probability == 0);

  Rng rng(4);
  const auto single = random_hmm<double>(1, 3, rng);
  const auto o = random_symbols(rng, 7, 3);
  const auto q = viterbi(single, std::span<const Symbol>(o));
  CHECK(q.states == std::vector<int>(7, 0));
  CHECK(std::abs(q.log_probability - forward_log_likelihood(single, std::span<const Symbol>(o))) <= 1e-12);

  const SymbolSequence never{0, 0};
  CHECK_THROWS_AS(viterbi(chain, std::span<const Symbol>(never)), ZeroProbabilityError);
}

TEST_CASE("viterbi breaks ties toward the lower state") {
  Hmm flat{Eigen::Vector2d(0.5, 0.5), Eigen::MatrixXd::Constant(2, 2, 0.5), Eigen::MatrixXd::Constant(2, 1, 1.0)};
  const SymbolSequence obs{0, 0, 0};
  CHECK(viterbi(flat, std::span<const Symbol>(obs)).states == std::vector<int>{0, 0, 0});
}

TEST_CASE("viterbi matches path enumeration") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = random_hmm<double>(3, 4, rng);
    const auto obs = random_symbols(rng, 5, 4);
    std::vector<int> best;
    const double want = brute_viterbi(model, obs, &best);
    const auto got = viterbi(model, std::span<const Symbol>(obs));
    CHECK(std::abs(got.log_probability - want) <= 1e-10);
    CHECK(std::abs(path_log_prob(model, got.states, obs) - want) <= 1e-10);
    CHECK(got.log_probability <= forward_log_likelihood(model, std::span<const Symbol>(obs)) + 1e-12);
  }
}

TEST_CASE("baum-welch closed-form single state") {
  Hmm one{Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Constant(1, 3, 1.0 / 3)};
  const std::vector<SymbolSequence> data{{0, 0, 0}};
  BaumWelchOptions<double> opts;
  opts.smoothing = 0;
  opts.max_iterations = 1;
  const auto r = baum_welch(one, std::span<const SymbolSequence>(data), opts);
  CHECK(std::abs(r.model.emission(0, 0) - 1) <= 1e-9);
  CHECK(r.iterations == 1);
}

TEST_CASE("baum-welch leaves a fixed point unchanged") {
  Hmm one{Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd(1, 2)};
  one.emission << 0.25, 0.75;
  const std::vector<SymbolSequence> data{{0, 1, 1, 1}, {1, 1, 0, 1}};
  BaumWelchOptions<double> opts;
  opts.smoothing = 0;
  const auto r = baum_welch(one, std::span<const SymbolSequence>(data), opts);
  CHECK((r.model.emission - one.emission).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(r.converged);
}

TEST_CASE("baum-welch likelihood is nondecreasing and tables stay stochastic") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int s = uniform_int(rng, 1, 4), m = uniform_int(rng, 2, 6);
    const auto truth = random_hmm<double>(s, m, rng);
    std::vector<SymbolSequence> data;
    for (int n = 0; n < 10; ++n) data.push_back(sample(truth, uniform_int(rng, 1, 25), rng).second);
    BaumWelchOptions<double> opts;
    opts.smoothing = 0;
    opts.tolerance = 0;
    opts.max_iterations = 30;
    int checked = 0;
    opts.observer = [&](int, const Hmm& current) {
      CHECK_NOTHROW(current.validate());
      ++checked;
    };
    const auto r = baum_welch(random_hmm<double>(s, m, rng), std::span<const SymbolSequence>(data), opts);
    CHECK(checked == r.iterations);
    for (std::size_t k = 1; k < r.log_likelihoods.size(); ++k)
      CHECK(r.log_likelihoods[k] >= r.log_likelihoods[k - 1] - 1e-8);
    CHECK(std::abs(r.log_likelihoods.back() - total_ll(r.model, data)) <= 1e-8 * std::abs(r.log_likelihoods.back()));
  }
}

TEST_CASE("baum-welch zero-probability data") {
  Hmm one{Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd(1, 2)};
  one.emission << 1, 0;
  const std::vector<SymbolSequence> data{{0, 1}};
  BaumWelchOptions<double> opts;
  opts.smoothing = 0;
  try {
    baum_welch(one, std::span<const SymbolSequence>(data), opts);
    FAIL("expected an error");
  } catch (const ZeroProbabilityError& e) {
    CHECK(std::string(e.what()).find("smoothing") != std::string::npos);
  }
  const std::vector<SymbolSequence> bad{{0, 5}};
  CHECK_THROWS_AS(baum_welch(one, std::span<const SymbolSequence>(bad), opts), Error);
}

TEST_CASE("baum-welch recovers a generator's likelihood") {
  Rng rng(7);
  const Hmm truth = generator(0);
  std::vector<SymbolSequence> train, held;
  for (int n = 0; n < 1000; ++n) train.push_back(sample(truth, 20, rng).second);
  for (int n = 0; n < 200; ++n) held.push_back(sample(truth, 20, rng).second);
  BaumWelchOptions<double> opts;
  const auto fit = train_hmm<double>(std::span<const SymbolSequence>(train), 2, 4, 3, HmmTopology::Ergodic, opts, rng);
  const double symbols = 200 * 20;
  const double gap = (total_ll(truth, held) - total_ll(fit.model, held)) / symbols;
  CHECK(std::abs(gap) <= 0.05);
}

TEST_CASE("classify examples") {
  Rng rng(8);
  const std::vector<Hmm> single{random_hmm<double>(2, 3, rng)};
  const SymbolSequence any{1, 2};
  CHECK(classify(std::span<const Hmm>(single), std::span<const Symbol>(any)).label == single[0].label);

  Hmm a{Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd(1, 2), 4};
  a.emission << 1, 0;
  Hmm b = a;
  b.emission << 0, 1;
  b.label = 2;
  const std::vector<Hmm> both{b, a};
  const SymbolSequence zero{0};
  const auto c = classify(std::span<const Hmm>(both), std::span<const Symbol>(zero));
  CHECK(c.label == 4);
  CHECK(c.log_likelihoods[0] == -std::numeric_limits<double>::infinity());

  const std::vector<Hmm> none{b};
  CHECK_FALSE(classify(std::span<const Hmm>(none), std::span<const Symbol>(zero)).label.has_value());

  Hmm twin = a;
  twin.label = 1;
  const std::vector<Hmm> tied{a, twin};
  CHECK(classify(std::span<const Hmm>(tied), std::span<const Symbol>(zero)).label == 1);

  Hmm wide = random_hmm<double>(1, 5, rng);
  const std::vector<Hmm> mixed{a, wide};
  CHECK_THROWS_AS(classify(std::span<const Hmm>(mixed), std::span<const Symbol>(zero)), Error);
}

TEST_CASE("classify separates sampled generator sequences") {
  Rng rng(9);
  std::vector<Hmm> models{generator(0), generator(1)};
  Hmm third = generator(0);
  third.emission << 0.1, 0.1, 0.1, 0.7, 0.7, 0.1, 0.1, 0.1;
  third.transition << 0.1, 0.9, 0.9, 0.1;
  third.label = 2;
  models.push_back(third);
  int correct = 0;
  for (const auto& m : models)
    for (int n = 0; n < 50; ++n) {
      const auto obs = sample(m, 30, rng).second;
      correct += classify(std::span<const Hmm>(models), std::span<const Symbol>(obs)).label == m.label;
    }
  CHECK(correct >= 143);
}

TEST_CASE("random_hmm topologies") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const int s = uniform_int(rng, 1, 5);
    const auto e = random_hmm<double>(s, 3, rng);
    CHECK_NOTHROW(e.validate());
    const auto l = random_hmm<double>(s, 3, rng, HmmTopology::LeftToRight);
    CHECK_NOTHROW(l.validate());
    CHECK(l.initial[0] == 1);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j)
        if (j != i && j != i + 1) CHECK(l.transition(i, j) == 0);
  }
  CHECK_THROWS_AS(random_hmm<double>(0, 3, rng), Error);
}

TEST_CASE("train_hmm is reproducible and keeps the best restart") {
  Rng data_rng(11);
  std::vector<SymbolSequence> data;
  for (int n = 0; n < 20; ++n) data.push_back(sample(generator(1), 15, data_rng).second);
  BaumWelchOptions<double> opts;
  Rng r1(3), r2(3);
  const auto a = train_hmm<double>(std::span<const SymbolSequence>(data), 3, 4, 4, HmmTopology::Ergodic, opts, r1);
  const auto b = train_hmm<double>(std::span<const SymbolSequence>(data), 3, 4, 4, HmmTopology::Ergodic, opts, r2);
  CHECK(a.model.emission == b.model.emission);
  CHECK(a.model.transition == b.model.transition);
  REQUIRE(a.logs.size() == 4);
  const double best = a.logs[static_cast<std::size_t>(a.best_restart)].log_likelihoods.back();
  for (const auto& log : a.logs) CHECK(log.log_likelihoods.back() <= best);
}

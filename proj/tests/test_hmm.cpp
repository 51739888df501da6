#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"

using namespace multipath;

namespace {

ObservationSequence obs(std::vector<Symbol> v, std::size_t alphabet) { return ObservationSequence(std::move(v), alphabet); }

ObservationSequence random_obs(std::size_t n, std::size_t alphabet, RngStream& rng) {
  std::vector<Symbol> v(n);
  for (auto& x : v) x = static_cast<Symbol>(rng.below(alphabet));
  return obs(std::move(v), alphabet);
}

HmmParams fixed_two_state() {
  return HmmParams(SimplexVector({0.6, 0.4}), {SimplexVector({0.7, 0.3}), SimplexVector({0.2, 0.8})},
                   {SimplexVector({0.5, 0.1, 0.4}), SimplexVector({0.1, 0.6, 0.3})});
}

}  // namespace

TEST(HmmParams, RejectsInconsistentRows) {
  EXPECT_THROW(HmmParams(SimplexVector({1.0}), {SimplexVector({0.5, 0.5})}, {SimplexVector({1.0})}), InvalidArgument);
  EXPECT_THROW(HmmParams(SimplexVector({0.5, 0.5}), {SimplexVector({1.0, 0.0})}, {SimplexVector({1.0})}), InvalidArgument);
  EXPECT_THROW(HmmParams(SimplexVector({0.5, 0.5}), {SimplexVector({1.0, 0.0}), SimplexVector({0.0, 1.0})},
                         {SimplexVector({1.0}), SimplexVector({0.5, 0.5})}),
               InvalidArgument);
  Matrix<double> zero_row(2, 2, 0.0);
  zero_row(0, 0) = 1.0;
  EXPECT_THROW(HmmParams::from_matrices({0.5, 0.5}, zero_row, Matrix<double>(2, 1, 1.0)), InvalidArgument);
}

TEST(Observations, RejectSymbolsOutsideAlphabet) {
  EXPECT_THROW(obs({0, 3}, 3), InvalidArgument);
  EXPECT_NO_THROW(obs({0, 2}, 3));
}

TEST(HmmGenerate, SingleStateIsAllZeros) {
  RngStream rng(1, {0, 0, Phase::data});
  const HmmParams p(SimplexVector({1.0}), {SimplexVector({1.0})}, {SimplexVector({0.3, 0.7})});
  const auto [states, w] = hmm_generate(p, 500, rng);
  EXPECT_EQ(states.size(), 500u);
  EXPECT_TRUE(std::all_of(states.begin(), states.end(), [](State s) { return s == 0; }));
  EXPECT_THROW(hmm_generate(p, 0, rng), InvalidArgument);
}

TEST(HmmGenerate, PointMassEmissionsCopyTheStates) {
  RngStream rng(2, {0, 0, Phase::data});
  const HmmParams p(SimplexVector::uniform(3), {SimplexVector::uniform(3), SimplexVector::uniform(3), SimplexVector::uniform(3)},
                    {SimplexVector({1, 0, 0}), SimplexVector({0, 1, 0}), SimplexVector({0, 0, 1})});
  const auto [states, w] = hmm_generate(p, 1000, rng);
  for (std::size_t i = 0; i < states.size(); ++i) ASSERT_EQ(states[i], w[i]);
}

TEST(HmmGenerate, SwitchRateMatchesTransitionProbability) {
  RngStream rng(3, {0, 0, Phase::data});
  const HmmParams p(SimplexVector::uniform(2), {SimplexVector({0.55, 0.45}), SimplexVector({0.45, 0.55})},
                    {SimplexVector({0.5, 0.5}), SimplexVector({0.5, 0.5})});
  const auto [states, w] = hmm_generate(p, 200000, rng);
  std::size_t switches = 0;
  for (std::size_t i = 1; i < states.size(); ++i) switches += states[i] != states[i - 1];
  EXPECT_NEAR(switches / double(states.size() - 1), 0.45, 0.01);
}

TEST(PathLikelihood, Examples) {
  const HmmParams p = fixed_two_state();
  EXPECT_NEAR(path_log_likelihood(p, {1}, obs({2}, 3)), std::log(0.4) + std::log(0.3), 1e-14);
  const HmmParams blocked(SimplexVector({0.5, 0.5}), {SimplexVector({1.0, 0.0}), SimplexVector({0.5, 0.5})},
                          {SimplexVector({1.0}), SimplexVector({1.0})});
  EXPECT_EQ(path_log_likelihood(blocked, {0, 1}, obs({0, 0}, 1)), -INFINITY);
  EXPECT_THROW(path_log_likelihood(p, {0, 1}, obs({0}, 3)), InvalidArgument);
}

TEST(PathLikelihood, SumOverPathsEqualsForward) {
  const HmmParams p = fixed_two_state();
  const auto w = obs({2, 0, 1}, 3);
  double total = 0.0;
  oracle::enumerate(3, 2, [&](const auto& path) { total += std::exp(path_log_likelihood(p, path, w)); });
  EXPECT_NEAR(total, std::exp(forward_log_likelihood(p, w)), 1e-10);
}

TEST(Forward, SingleStateIsSumOfEmissionLogs) {
  const HmmParams p(SimplexVector({1.0}), {SimplexVector({1.0})}, {SimplexVector({0.2, 0.3, 0.5})});
  const auto w = obs({0, 2, 2, 1}, 3);
  EXPECT_NEAR(forward_log_likelihood(p, w), std::log(0.2) + 2 * std::log(0.5) + std::log(0.3), 1e-12);
}

TEST(Forward, IdenticalEmissionsIgnoreTransitions) {
  const SimplexVector e({0.1, 0.9});
  const HmmParams p(SimplexVector({0.3, 0.7}), {SimplexVector({0.9, 0.1}), SimplexVector({0.4, 0.6})}, {e, e});
  const auto w = obs({1, 1, 0, 1, 0}, 2);
  EXPECT_NEAR(forward_log_likelihood(p, w), 3 * std::log(0.9) + 2 * std::log(0.1), 1e-12);
}

TEST(Forward, MatchesBruteForceOnRandomInstances) {
  RngStream rng(21, {0, 0, Phase::aux});
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t s = 1 + rng.below(3), n = 1 + rng.below(8), a = 1 + rng.below(4);
    const HmmParams p = oracle::random_hmm(s, a, rng);
    const auto w = random_obs(n, a, rng);
    const double brute = oracle::hmm_data_prob(p, w.symbols());
    EXPECT_NEAR(forward_log_likelihood(p, w), std::log(brute), 1e-10) << "s=" << s << " n=" << n;
  }
}

TEST(Forward, RejectsOutOfRangeSymbols) {
  EXPECT_THROW(forward_log_likelihood(fixed_two_state(), obs({0, 3}, 4)), InvalidArgument);
}

TEST(BaumWelch, OneUpdateMatchesEnumeratedExpectations) {
  const HmmParams p = fixed_two_state();
  const std::vector<Symbol> w{2, 1};
  // Posterior over the four paths.
  std::vector<double> post(4);
  double z = 0.0;
  oracle::enumerate(2, 2, [&](const auto& path) {
    const double v = oracle::hmm_path_prob(p, path, w);
    post[path[0] * 2 + path[1]] = v;
    z += v;
  });
  for (double& v : post) v /= z;
  double init[2] = {0, 0}, xi[2][2] = {{0, 0}, {0, 0}}, em[2][3] = {{0, 0, 0}, {0, 0, 0}};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double q = post[a * 2 + b];
      init[a] += q;
      xi[a][b] += q;
      em[a][w[0]] += q;
      em[b][w[1]] += q;
    }
  }
  const auto r = baum_welch(obs(w, 3), 2, 3, p, 1, -INFINITY);
  ASSERT_EQ(r.trace.size(), 2u);
  for (int a = 0; a < 2; ++a) {
    EXPECT_NEAR(r.params.initial(a), init[a], 1e-10);
    const double row = xi[a][0] + xi[a][1];
    for (int b = 0; b < 2; ++b) EXPECT_NEAR(r.params.transition(a, b), xi[a][b] / row, 1e-10);
    const double erow = em[a][0] + em[a][1] + em[a][2];
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(r.params.emission(a, k), em[a][k] / erow, 1e-10);
  }
}

TEST(BaumWelch, SingleStateFixedPointIsUnchanged) {
  const HmmParams p(SimplexVector({1.0}), {SimplexVector({1.0})}, {SimplexVector({0.5, 0.25, 0.25})});
  const auto r = baum_welch(obs({0, 1, 2, 0}, 3), 1, 3, p, 1, -INFINITY);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(r.params.emission(0, k), p.emission(0, k), 1e-12);
  EXPECT_NEAR(r.params.transition(0, 0), 1.0, 1e-12);
}

TEST(BaumWelch, TraceNeverDecreases) {
  RngStream rng(31, {0, 0, Phase::aux});
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t s = 2 + rng.below(2), a = 2 + rng.below(4), n = 30 + rng.below(100);
    const auto w = random_obs(n, a, rng);
    const auto r = baum_welch(w, s, a, oracle::random_hmm(s, a, rng), 50, -INFINITY);
    for (std::size_t k = 1; k < r.trace.size(); ++k) ASSERT_GE(r.trace[k], r.trace[k - 1] - 1e-8);
    EXPECT_NEAR(r.trace.back(), forward_log_likelihood(r.params, w), 1e-9);
  }
}

TEST(BaumWelch, StopsOnSmallImprovementAndKeepsEmptyRows) {
  // State 1 is unreachable, so its rows carry no expected mass.
  const HmmParams p(SimplexVector({1.0, 0.0}), {SimplexVector({1.0, 0.0}), SimplexVector({0.3, 0.7})},
                    {SimplexVector({0.5, 0.5}), SimplexVector({0.9, 0.1})});
  const auto r = baum_welch(obs({0, 1, 1, 0, 1}, 2), 2, 2, p, 100, 1e-9);
  EXPECT_LT(r.trace.size(), 100u);
  EXPECT_NEAR(r.params.transition(1, 0), 0.3, 1e-15);
  EXPECT_NEAR(r.params.emission(1, 0), 0.9, 1e-15);
}

TEST(BaumWelch, RejectsDegenerateInit) {
  const HmmParams impossible(SimplexVector({1.0, 0.0}), {SimplexVector({1.0, 0.0}), SimplexVector({0.0, 1.0})},
                             {SimplexVector({1.0, 0.0}), SimplexVector({0.0, 1.0})});
  EXPECT_THROW(baum_welch(obs({1, 1}, 2), 2, 2, impossible, 5, 0.0), InvalidArgument);
  EXPECT_THROW(baum_welch(obs({1, 1}, 2), 3, 2, impossible, 5, 0.0), InvalidArgument);
}

TEST(HmmCounts, TotalsAndDoubling) {
  const auto w = obs({0, 1, 1, 0}, 2);
  const StateSequence p{0, 1, 1, 0};
  const auto one = HmmCounts::from_paths({{p}}, w, 2);
  const auto two = HmmCounts::from_paths({{p, p}}, w, 2);
  EXPECT_EQ(one.init, (std::vector<Count>{1, 0}));
  EXPECT_EQ(one.trans(0, 1), 1);
  EXPECT_EQ(one.trans(1, 1), 1);
  EXPECT_EQ(one.trans(1, 0), 1);
  for (std::size_t k = 0; k < one.trans.data().size(); ++k) EXPECT_EQ(two.trans.data()[k], 2 * one.trans.data()[k]);
  for (std::size_t k = 0; k < one.emit.data().size(); ++k) EXPECT_EQ(two.emit.data()[k], 2 * one.emit.data()[k]);
  EXPECT_EQ(two.init[0], 2);
}

TEST(HmmSampleParams, ZeroCountsDrawFromPrior) {
  RngStream a(4, {0, 0, Phase::params}), b(4, {0, 0, Phase::params});
  const HmmParams drawn = hmm_sample_params(HmmCounts(2, 3), HmmPriors{}, a);
  const SimplexVector init = sample_dirichlet(std::vector<double>{1, 1}, b);
  EXPECT_EQ(drawn.initial(), init);
}

TEST(HmmSampleParams, ConcentratesOnEmpiricalFrequency) {
  HmmCounts c(2, 2);
  c.trans(0, 0) = 30000;
  c.trans(0, 1) = 70000;
  c.trans_total[0] = 100000;
  RngStream rng(5, {0, 0, Phase::params});
  double mean = 0.0;
  for (int i = 0; i < 200; ++i) mean += hmm_sample_params(c, HmmPriors{}, rng).transition(0, 1) / 200;
  EXPECT_NEAR(mean, 0.7, 0.01);
}

TEST(PcSiteDist, Examples) {
  const HmmParams flat(SimplexVector::uniform(3), {SimplexVector::uniform(3), SimplexVector::uniform(3), SimplexVector::uniform(3)},
                       {SimplexVector::uniform(2), SimplexVector::uniform(2), SimplexVector::uniform(2)});
  const auto d = hmm_pc_site_dist(flat, {0, 2, 1}, 1, obs({0, 1, 1}, 2));
  for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(d[t], 1.0 / 3, 1e-15);

  const HmmParams peaked(SimplexVector::uniform(2), {SimplexVector::uniform(2), SimplexVector::uniform(2)},
                         {SimplexVector({1, 0}), SimplexVector({0, 1})});
  const auto e = hmm_pc_site_dist(peaked, {0, 0, 0}, 1, obs({0, 1, 0}, 2));
  EXPECT_EQ(e[1], 1.0);

  const HmmParams p = fixed_two_state();
  const auto f = hmm_pc_site_dist(p, {0, 1, 1}, 1, obs({2, 0, 1}, 3));
  const double w0 = 0.7 * 0.3 * 0.5, w1 = 0.3 * 0.8 * 0.1;
  EXPECT_NEAR(f[0], w0 / (w0 + w1), 1e-12);
  EXPECT_NEAR(f[1], w1 / (w0 + w1), 1e-12);
}

TEST(PcSiteDist, MatchesPathLikelihoodRatios) {
  RngStream rng(6, {0, 0, Phase::aux});
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t s = 1 + rng.below(3), n = 1 + rng.below(6), a = 1 + rng.below(3);
    const HmmParams p = oracle::random_hmm(s, a, rng);
    const auto w = random_obs(n, a, rng);
    StateSequence path(n);
    for (auto& v : path) v = static_cast<State>(rng.below(s));
    const std::size_t i = rng.below(n);
    std::vector<double> target(s);
    double z = 0.0;
    for (std::size_t t = 0; t < s; ++t) {
      auto q = path;
      q[i] = static_cast<State>(t);
      target[t] = oracle::hmm_path_prob(p, q, w.symbols());
      z += target[t];
    }
    const auto d = hmm_pc_site_dist(p, path, i, w);
    for (std::size_t t = 0; t < s; ++t) ASSERT_NEAR(d[t], target[t] / z, 1e-12);
  }
}

TEST(PcSiteDist, AllZeroIsDegenerate) {
  const HmmParams p(SimplexVector({1.0, 0.0}), {SimplexVector({1.0, 0.0}), SimplexVector({0.0, 1.0})},
                    {SimplexVector({1.0, 0.0}), SimplexVector({1.0, 0.0})});
  EXPECT_THROW(hmm_pc_site_dist(p, {0}, 0, obs({1}, 2)), DegenerateConditional);
}

namespace {

// Normalized exp of the collapsed joint over candidate values of site (j, i).
std::vector<double> brute_collapsed(HmmPathSet ps, std::size_t j, std::size_t i, const ObservationSequence& w,
                                    std::size_t s, const HmmPriors& pr) {
  std::vector<double> lj(s);
  for (std::size_t t = 0; t < s; ++t) {
    ps.paths[j][i] = static_cast<State>(t);
    lj[t] = hmm_log_joint_collapsed(ps, w, s, pr);
  }
  const double top = *std::max_element(lj.begin(), lj.end());
  double z = 0.0;
  for (double& v : lj) z += (v = std::exp(v - top));
  for (double& v : lj) v /= z;
  return lj;
}

}  // namespace

TEST(CollapsedSiteDist, MatchesJointRatiosOnRandomInstances) {
  RngStream rng(7, {0, 0, Phase::aux});
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t s = 1 + rng.below(3), n = 1 + rng.below(6), a = 1 + rng.below(3), m = 1 + rng.below(3);
    const HmmPriors pr{0.3 + 2 * rng.uniform(), 0.3 + 2 * rng.uniform(), 0.3 + 2 * rng.uniform()};
    const auto w = random_obs(n, a, rng);
    HmmPathSet ps;
    for (std::size_t j = 0; j < m; ++j) {
      StateSequence p(n);
      for (auto& v : p) v = static_cast<State>(rng.below(s));
      ps.paths.push_back(p);
    }
    const std::size_t j = rng.below(m), i = rng.below(n);
    const auto counts = HmmCounts::from_paths(ps, w, s);
    const auto d = hmm_collapsed_site_dist(counts, ps, j, i, w, pr);
    const auto target = brute_collapsed(ps, j, i, w, s, pr);
    for (std::size_t t = 0; t < s; ++t) ASSERT_NEAR(d[t], target[t], 1e-10) << "rep " << rep;
  }
}

TEST(CollapsedSiteDist, EmptyRemainingCountsGiveUniform) {
  const HmmPathSet single{{{0}}};
  const auto one = obs({0}, 2);
  const auto e = hmm_collapsed_site_dist(HmmCounts::from_paths(single, one, 3), single, 0, 0, one, HmmPriors{});
  for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(e[t], 1.0 / 3, 1e-15);
}

TEST(CollapsedSiteDist, DetectsInconsistentCounts) {
  const auto w = obs({0, 1, 0}, 2);
  const HmmPathSet ps{{{0, 1, 1}}};
  auto counts = HmmCounts::from_paths(ps, w, 2);
  counts.emit(1, 0) += 1;
  counts.emit_total[1] += 1;
  EXPECT_THROW(hmm_collapsed_site_dist(counts, ps, 0, 1, w, HmmPriors{}), ConsistencyError);
  auto shifted = HmmCounts::from_paths(HmmPathSet{{{0, 0, 0}}}, w, 2);
  EXPECT_THROW(hmm_collapsed_site_dist(shifted, ps, 0, 1, w, HmmPriors{}), ConsistencyError);
}

TEST(CollapsedJoint, TrivialInstanceIsZero) {
  EXPECT_NEAR(hmm_log_joint_collapsed(HmmPathSet{{{0}}}, obs({0}, 1), 1, HmmPriors{0.7, 1.3, 2.1}), 0.0, 1e-14);
}

TEST(CollapsedJoint, InvariantUnderStateRelabeling) {
  const auto w = obs({0, 2, 1, 1, 0}, 3);
  const HmmPathSet ps{{{0, 1, 2, 2, 0}, {1, 1, 0, 2, 2}}};
  HmmPathSet relabeled = ps;
  const State perm[3] = {2, 0, 1};
  for (auto& p : relabeled.paths)
    for (auto& v : p) v = perm[v];
  const HmmPriors pr{0.5, 1.5, 0.8};
  EXPECT_NEAR(hmm_log_joint_collapsed(ps, w, 3, pr), hmm_log_joint_collapsed(relabeled, w, 3, pr), 1e-12);
}

TEST(CollapsedJoint, MatchesQuadrature) {
  // Integer priors keep the integrand polynomial, so Gauss-Legendre is exact.
  const std::vector<std::uint32_t> w{1, 0};
  for (const HmmPriors pr : {HmmPriors{1, 1, 1}, HmmPriors{2, 1, 3}}) {
    for (const auto& paths : std::vector<std::vector<std::vector<std::uint32_t>>>{{{0, 1}}, {{1, 1}}, {{0, 0}, {1, 0}}}) {
      HmmPathSet ps;
      for (const auto& p : paths) ps.paths.push_back(p);
      const double quad = oracle::hmm_joint_by_quadrature(paths, w, 2, pr, 8);
      EXPECT_NEAR(hmm_log_joint_collapsed(ps, obs(w, 2), 2, pr), quad, 1e-10);
    }
  }
}

TEST(Factorization, PathSumOfProductsIsPowerOfDataLikelihood) {
  RngStream rng(8, {0, 0, Phase::aux});
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t s = 2, n = 1 + rng.below(4), a = 2 + rng.below(2);
    const HmmParams p = oracle::random_hmm(s, a, rng);
    const auto w = random_obs(n, a, rng);
    const double data = oracle::hmm_data_prob(p, w.symbols());
    for (std::size_t m = 1; m <= 3; ++m) {
      double sum = 0.0;
      oracle::enumerate(n * m, s, [&](const auto& flat) {
        double prod = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
          StateSequence path(flat.begin() + j * n, flat.begin() + (j + 1) * n);
          prod *= std::exp(path_log_likelihood(p, path, w));
        }
        sum += prod;
      });
      EXPECT_NEAR(sum / std::pow(data, static_cast<double>(m)), 1.0, 1e-9);
    }
  }
}

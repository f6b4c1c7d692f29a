#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fedpd/algorithms.hpp"
#include "fedpd/data.hpp"

using namespace fedpd;

namespace {

ModelVec scalar(double v) {
  ModelVec x(1);
  x << v;
  return x;
}

RunConfig fedavg_config(double eta, std::size_t Q, std::size_t T) {
  RunConfig c;
  c.algorithm = Algorithm::FedAvgGD;
  c.eta = eta;
  c.local_steps = Q;
  c.rounds = T;
  return c;
}

RunConfig fedpd_config(double eta, std::size_t T, double p = 0.0) {
  RunConfig c;
  c.algorithm = Algorithm::FedPDGD;
  c.eta = eta;
  c.rounds = T;
  c.p = p;
  return c;
}

// Exact least-squares pieces: H = A'A / n, c = A'b / n.
struct LeastSquares {
  Eigen::MatrixXd H;
  ModelVec c;
};

LeastSquares least_squares(const Shard& s) {
  const double n = static_cast<double>(s.size());
  return {s.features().transpose() * s.features() / n, s.features().transpose() * s.labels() / n};
}

}  // namespace

TEST(Names, RoundTrip) {
  for (Algorithm a : all_algorithms()) EXPECT_EQ(parse_algorithm(to_string(a)), a);
  EXPECT_THROW(parse_algorithm("FedSGD"), ConfigError);
  EXPECT_EQ(parse_schedule_kind("inv_sqrt"), StepSchedule::Kind::InvSqrt);
  EXPECT_THROW(parse_schedule_kind("cosine"), ConfigError);
}

TEST(Schedule, Values) {
  StepSchedule s;
  s.kind = StepSchedule::Kind::InvSqrt;
  s.eta = 0.5;
  s.eta_inner = 0.2;
  EXPECT_EQ(s.at(3, 0, 4), 0.5);
  EXPECT_EQ(s.at(3, 1, 4), 0.1);
  s.kind = StepSchedule::Kind::InvSqrtIter;
  EXPECT_EQ(s.at(1, 0, 3), 0.25);
  s.kind = StepSchedule::Kind::Custom;
  s.values = {1.0, 2.0, 3.0};
  EXPECT_EQ(s.at(0, 2, 2), 3.0);
  EXPECT_EQ(s.at(5, 1, 2), 3.0);
  s.values.clear();
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(FedAvg, SingleAgentSingleStepIsGradientDescent) {
  const Problem p = gen_weak_noniid(1, 30, 4, 1);
  const ModelVec x = ModelVec::LinSpaced(4, -1.0, 1.0);
  auto states = make_agents(p, x, 0);
  const RoundOutcome out = fedavg_round(p, states, StepSchedule::constant(0.3), 1, OracleVariant::GD, 1, {});
  EXPECT_EQ(out.x0, ModelVec(x - 0.3 * p.grad(0, x)));
  EXPECT_EQ(out.samples, 30u);
  EXPECT_EQ(out.local_iters, 1u);
}

TEST(FedAvg, IdenticalShardsStayBitIdentical) {
  const Problem p = gen_identical(4, 20, 3, 2);
  auto states = make_agents(p, ModelVec::Constant(3, 0.5), 0);
  for (std::size_t r = 0; r < 5; ++r) {
    RoundContext ctx;
    ctx.round = r;
    fedavg_round(p, states, StepSchedule::constant(0.2), 3, OracleVariant::GD, 1, ctx);
    for (const AgentState& s : states) ASSERT_EQ(s.x, states.front().x);
  }
}

TEST(FedAvg, QuadraticPairAmplification) {
  for (double eta : {0.1, 0.5, 1.0}) {
    RunConfig c = fedavg_config(eta, 2, 10);
    c.x_init = scalar(1.0);
    const Problem p = Problem::quadratic_pair();
    std::vector<double> xs{1.0};
    run(p, c, [&](std::size_t, const std::vector<AgentState>&, const RoundOutcome& out) { xs.push_back(out.x0[0]); });
    for (std::size_t k = 1; k < xs.size(); ++k) EXPECT_NEAR(xs[k] / xs[k - 1], 1.0 + eta * eta, 1e-12) << eta;
  }
}

TEST(FedAvg, DivergenceIsRecorded) {
  RunConfig c = fedavg_config(1.0, 2, 200);
  c.x_init = scalar(1.0);
  const Trace t = run(Problem::quadratic_pair(), c);
  EXPECT_TRUE(t.diverged);
  EXPECT_LT(t.rows.size(), 200u);
  EXPECT_TRUE(t.rows.back().diverged);
}

TEST(FedAvg, LocalEscapeCountsAsDivergence) {
  // Stage means grow by 1.25 but the expanding agent reaches 2.25 times the mean first.
  RunConfig c = fedavg_config(0.5, 2, 100);
  c.x_init = scalar(1.0);
  c.divergence_threshold = 1e6;
  const Trace t = run(Problem::quadratic_pair(), c);
  ASSERT_TRUE(t.diverged);
  EXPECT_LE(std::abs(t.final_x0[0]), 1e6);
  EXPECT_GT(std::abs(t.final_x0[0]) * 2.25, 1e6);
}

TEST(FedProx, ZeroRhoEqualsFedAvg) {
  const Problem p = gen_weak_noniid(3, 20, 4, 3);
  auto a = make_agents(p, ModelVec::Constant(4, 0.1), 0);
  auto b = a;
  for (std::size_t r = 0; r < 4; ++r) {
    RoundContext ctx;
    ctx.round = r;
    const RoundOutcome oa = fedavg_round(p, a, StepSchedule::constant(0.2), 3, OracleVariant::GD, 1, ctx);
    const RoundOutcome ob = fedprox_round(p, b, StepSchedule::constant(0.2), 0.0, 3, ctx);
    ASSERT_EQ(oa.x0, ob.x0);
  }
}

TEST(FedProx, IdenticalShardsStaySynchronised) {
  const Problem p = gen_identical(3, 15, 2, 4);
  auto states = make_agents(p, ModelVec::Constant(2, -0.3), 0);
  fedprox_round(p, states, StepSchedule::constant(0.2), 1.0, 4, {});
  for (const AgentState& s : states) EXPECT_EQ(s.x, states.front().x);
}

TEST(FedProx, OriginIsFixedPoint) {
  const Problem p = Problem::quadratic_pair();
  auto states = make_agents(p, scalar(0.0), 0);
  const RoundOutcome out = fedprox_round(p, states, StepSchedule::constant(0.3), 1.0, 5, {});
  EXPECT_EQ(out.x0[0], 0.0);
}

TEST(FedProx, SingleQuadraticConvergesToFixedPoint) {
  // One agent with f(x) = x^2 / 2: the exact proximal map has the unique fixed point 0.
  Eigen::MatrixXd a(1, 1);
  a << 1.0;
  const Problem p(LinearRegression{}, {Shard(a, Eigen::VectorXd::Zero(1))}, 1.0);
  auto at_zero = make_agents(p, scalar(0.0), 0);
  EXPECT_EQ(fedprox_round(p, at_zero, StepSchedule::constant(0.2), 1.0, 5, {}).x0[0], 0.0);
  auto states = make_agents(p, scalar(2.0), 0);
  double prev = 2.0;
  for (std::size_t r = 0; r < 50; ++r) {
    RoundContext ctx;
    ctx.round = r;
    const double x = fedprox_round(p, states, StepSchedule::constant(0.2), 1.0, 5, ctx).x0[0];
    ASSERT_LT(std::abs(x), std::abs(prev));
    prev = x;
  }
  EXPECT_LT(std::abs(prev), 1e-10);
}

TEST(FedPd, IdenticalAgentsKeepEqualCopies) {
  const Problem p = gen_identical(4, 20, 3, 5);
  RunConfig c = fedpd_config(0.5 / p.lipschitz(), 5);
  c.oracle1.eps1 = 1e-12;
  run(p, c, [&](std::size_t, const std::vector<AgentState>& states, const RoundOutcome&) {
    for (const AgentState& s : states) {
      ASSERT_EQ(s.x0, states.front().x0);
      ASSERT_EQ(s.x, states.front().x);
    }
  });
}

TEST(FedPd, FirstRoundDualIdentity) {
  const Problem p = gen_weak_noniid(4, 25, 3, 6);
  const double eta = 0.5 / p.lipschitz();
  RunConfig c = fedpd_config(eta, 1);
  c.oracle1.eps1 = 1e-10;
  c.x_init = ModelVec::Constant(3, 0.2);
  run(p, c, [&](std::size_t, const std::vector<AgentState>& states, const RoundOutcome&) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      const ModelVec want = (states[i].x - *c.x_init) / eta;
      EXPECT_EQ(states[i].lambda, want);
      EXPECT_LE((p.grad(i, states[i].x) + states[i].lambda).squaredNorm(), c.oracle1.eps1);
    }
  });
}

TEST(FedPd, DualConsistencyEveryRound) {
  const Problem p = gen_weak_noniid(5, 20, 4, 7);
  RunConfig c = fedpd_config(0.5 / p.lipschitz(), 30, 0.3);
  c.oracle1.eps1 = 1e-9;
  run(p, c, [&](std::size_t, const std::vector<AgentState>& states, const RoundOutcome&) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      ASSERT_TRUE(states[i].oracle_converged);
      ASSERT_LE((p.grad(i, states[i].x) + states[i].lambda).squaredNorm(), c.oracle1.eps1);
    }
  });
}

TEST(FedPd, StableWhereFedAvgDiverges) {
  const Problem p = Problem::quadratic_pair();
  RunConfig pd = fedpd_config(0.2, 600);
  pd.oracle1.eps1 = 1e-10;
  pd.x_init = scalar(1.0);
  const Trace tpd = run(p, pd, [&](std::size_t, const std::vector<AgentState>&, const RoundOutcome& out) {
    ASSERT_LE(out.x0.norm(), 10.0);
  });
  EXPECT_FALSE(tpd.diverged);
  EXPECT_EQ(tpd.rows.size(), 600u);

  RunConfig avg = fedavg_config(0.2, 2, 600);
  avg.x_init = scalar(1.0);
  EXPECT_TRUE(run(p, avg).diverged);
}

TEST(FedPd, ConsensusExactAfterCommunication) {
  const Problem p = gen_weak_noniid(4, 20, 3, 8);
  RunConfig c = fedpd_config(0.5 / p.lipschitz(), 40, 0.5);
  std::size_t skipped = 0;
  const Trace t = run(p, c, [&](std::size_t r, const std::vector<AgentState>&, const RoundOutcome& out) {
    (void)r;
    if (!out.communicated) ++skipped;
  });
  EXPECT_GT(skipped, 0u);
  std::uint64_t prev = 0;
  for (const TraceRow& row : t.rows) {
    if (row.comm_rounds_cum > prev) EXPECT_EQ(row.consensus_err, 0.0) << row.round;
    prev = row.comm_rounds_cum;
  }
}

TEST(FedPd, SkipCountIsBinomial) {
  const Problem p = gen_identical(2, 5, 2, 9);
  RunConfig c = fedpd_config(0.5 / p.lipschitz(), 600, 0.5);
  c.oracle1.eps1 = 1e-6;
  const Trace t = run(p, c);
  const double rc = static_cast<double>(t.rows.back().comm_rounds_cum);
  EXPECT_LE(std::abs(rc - 300.0), 3.0 * std::sqrt(600.0 * 0.25));
}

TEST(FedPd, SingleAgentMatchesProximalMethodOfMultipliers) {
  const Problem p = gen_weak_noniid(1, 40, 3, 10, LinearRegression{});
  const double eta = 0.5 / p.lipschitz();
  RunConfig c = fedpd_config(eta, 20);
  c.oracle1.eps1 = 1e-26;
  c.oracle1.max_inner = 20000;
  c.x_init = ModelVec::Constant(3, 0.7);

  const LeastSquares ls = least_squares(p.shards()[0]);
  const Eigen::MatrixXd system = ls.H + Eigen::MatrixXd::Identity(3, 3) / eta;
  ModelVec x0 = *c.x_init;
  ModelVec lam = ModelVec::Zero(3);
  std::vector<ModelVec> reference;
  for (int r = 0; r < 20; ++r) {
    const ModelVec x = system.ldlt().solve(ls.c - lam + x0 / eta);
    lam = lam + (x - x0) / eta;
    x0 = x + eta * lam;
    reference.push_back(x0);
  }
  run(p, c, [&](std::size_t r, const std::vector<AgentState>&, const RoundOutcome& out) {
    EXPECT_LE((out.x0 - reference[r]).norm(), 1e-8) << r;
  });
}

TEST(FedPd, RejectsLargeEta) {
  const Problem p = Problem::quadratic_pair();
  EXPECT_THROW(run(p, fedpd_config(1.0, 1)), ConfigError);
  RunConfig c = fedpd_config(0.2, 1, 1.0);
  EXPECT_THROW(run(p, c), ConfigError);
}

TEST(FedPd, LintWarnsAboveTheoryRange) {
  const Problem p = Problem::quadratic_pair();
  EXPECT_TRUE(fedpd_config(0.2, 1).lint(p).empty());
  EXPECT_EQ(fedpd_config(0.5, 1).lint(p).size(), 1u);
}

TEST(FedPd, VarianceReducedSampleCount) {
  const Problem p = gen_weak_noniid(3, 20, 2, 11);
  RunConfig c;
  c.algorithm = Algorithm::FedPDVR;
  c.eta = 0.1;
  c.rounds = 23;
  c.oracle2.steps = 4;
  c.oracle2.batch = 3;
  c.oracle2.refresh_period = 5;
  const Trace t = run(p, c);
  const std::uint64_t M = 60;
  const std::uint64_t T = 23;
  const std::uint64_t refreshes = (T - 1) / 5 + 1;
  EXPECT_EQ(t.rows.back().samples_cum, M * refreshes + 2 * 3 * 4 * 3 * T);
  EXPECT_EQ(t.rows.back().local_iters_cum, 4u * 3u * T);
}

TEST(FedPd, FullBatchOracleIIMatchesOracleIGd) {
  const Problem p = gen_weak_noniid(3, 10, 2, 12, LinearRegression{});
  const double eta = 0.3 / p.lipschitz();
  const double gamma = 0.7 / p.lipschitz();
  RunConfig vr = fedpd_config(eta, 15);
  vr.algorithm = Algorithm::FedPDVR;
  vr.oracle2.gamma = gamma;
  vr.oracle2.steps = 3;
  vr.oracle2.batch = 10;
  RunConfig gd = fedpd_config(eta, 15);
  gd.oracle1.inner_stepsize = eta * gamma / (eta + gamma);
  gd.oracle1.max_inner = 3;
  gd.oracle1.eps1 = 1e-300;
  std::vector<ModelVec> a;
  run(p, vr, [&](std::size_t, const std::vector<AgentState>&, const RoundOutcome& out) { a.push_back(out.x0); });
  run(p, gd, [&](std::size_t r, const std::vector<AgentState>&, const RoundOutcome& out) {
    EXPECT_LE((out.x0 - a[r]).norm(), 1e-8) << r;
  });
}

TEST(SkipProbability, LinearFormulaAndRegime) {
  const double eta = (std::sqrt(5.0) - 1.0) / 8.0;
  const SkipChoice s = select_skip_probability(1.0, 1.0, eta, 1.0);
  const double threshold = (1.0 - 2.0 * eta) / (1.0 + eta);
  EXPECT_NEAR(s.threshold, threshold, 1e-15);
  EXPECT_NEAR(1.0 / (36.0 * eta), 0.179781, 1e-6);
  ASSERT_LT(1.0 / (36.0 * eta), threshold);
  EXPECT_EQ(s.regime, SkipRegime::Linear);
  EXPECT_NEAR(s.p, 1.0 / (36.0 * eta), 1e-15);
}

TEST(SkipProbability, VanishesForLargeDelta) {
  const SkipChoice s = select_skip_probability(1e-3, 1e6, 0.15, 1.0);
  EXPECT_LT(s.p, 1e-12);
  EXPECT_EQ(s.regime, SkipRegime::Linear);
}

TEST(SkipProbability, LogRegimeNeverBelowBoundary) {
  const double eta = 0.15;
  for (double ratio : {10.0, 100.0, 1e4, 1e8}) {
    const SkipChoice s = select_skip_probability(ratio, 1.0, eta, 1.0);
    EXPECT_EQ(s.regime, SkipRegime::Log) << ratio;
    EXPECT_GE(s.p, s.threshold);
    EXPECT_LT(s.p, 1.0);
  }
  const SkipChoice big = select_skip_probability(1e8, 1.0, eta, 1.0);
  EXPECT_NEAR(big.p, 1.0 - 2.0 / std::log(1e8 / (42.0 * eta)), 1e-15);
  EXPECT_EQ(select_skip_probability(1.0, 0.0, eta, 1.0).p, 1.0 - 1e-6);
}

TEST(SkipProbability, C3AtZero) {
  EXPECT_NEAR(skip_c3(0.0, 0.2, 2.0), 0.4 / 0.6, 1e-15);
  EXPECT_EQ(skip_c_of_p(0.0, 0.2, 1.0), 0.0);
}

TEST(Run, ZeroRoundsGivesEmptyTrace) {
  const Trace t = run(Problem::quadratic_pair(), fedpd_config(0.2, 0));
  EXPECT_TRUE(t.rows.empty());
  EXPECT_FALSE(t.diverged);
}

TEST(Run, DeterministicAcrossThreadCounts) {
  const Problem p = gen_strong_noniid(6, 30, 4, 1.0, 13);
  for (Algorithm a : all_algorithms()) {
    RunConfig c;
    c.algorithm = a;
    c.eta = is_fedpd(a) ? 0.5 / p.lipschitz() : 0.05;
    c.rounds = 8;
    c.local_steps = 3;
    c.p = is_fedpd(a) ? 0.4 : 0.0;
    c.batch = 4;
    c.oracle1.batch = 4;
    c.oracle2.batch = 4;
    c.seed = 21;
    c.threads = 1;
    const Trace t1 = run(p, c);
    c.threads = 4;
    const Trace t4 = run(p, c);
    ASSERT_EQ(t1.rows.size(), t4.rows.size()) << to_string(a);
    for (std::size_t r = 0; r < t1.rows.size(); ++r) {
      EXPECT_EQ(t1.rows[r].gap, t4.rows[r].gap) << to_string(a) << " round " << r;
      EXPECT_EQ(t1.rows[r].samples_cum, t4.rows[r].samples_cum);
      EXPECT_EQ(t1.rows[r].comm_rounds_cum, t4.rows[r].comm_rounds_cum);
      EXPECT_EQ(t1.rows[r].al_mean, t4.rows[r].al_mean);
    }
    EXPECT_EQ(t1.final_x0, t4.final_x0);
  }
}

TEST(Run, CountersAreCumulative) {
  const Problem p = gen_weak_noniid(3, 20, 3, 14);
  RunConfig c = fedavg_config(0.1, 4, 5);
  std::vector<double> losses;
  const Trace t = run(p, c, [&](std::size_t, const std::vector<AgentState>&, const RoundOutcome& out) {
    losses.push_back(p.global_loss(out.x0));
  });
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    EXPECT_EQ(t.rows[r].round, r + 1);
    EXPECT_EQ(t.rows[r].comm_rounds_cum, r + 1);
    EXPECT_EQ(t.rows[r].local_iters_cum, 3u * 4u * (r + 1));
    EXPECT_EQ(t.rows[r].samples_cum, 60u * 4u * (r + 1));
    EXPECT_EQ(t.rows[r].al_mean, losses[r]);
    EXPECT_EQ(t.rows[r].consensus_err, 0.0);
  }
}

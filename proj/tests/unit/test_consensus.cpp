#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <wbc/consensus.hpp>
#include <wbc/errors.hpp>

#include "oracles.hpp"

using namespace wbc;

namespace {

SolverConfig closed_form() {
  SolverConfig cfg;
  cfg.method = TransportMethod::closed_form;
  return cfg;
}

ConsensusState random_gaussians(int n, int d, std::mt19937_64& rng) {
  ConsensusState s;
  for (int i = 0; i < n; ++i)
    s.agents.emplace_back(GaussianMeasure(oracle::random_vector(d, -1, 1, rng),
                                          oracle::random_spd(d, 0.5, 2, rng)));
  return s;
}

ConsensusState diracs(const std::vector<double>& xs) {
  ConsensusState s;
  for (double x : xs) s.agents.emplace_back(DiscreteMeasure::dirac(Vector::Constant(1, x)));
  return s;
}

}  // namespace

TEST(ConsensusState, ValidateRejectsBadStates) {
  EXPECT_THROW(diracs({1.0}).validate(), std::invalid_argument);
  ConsensusState mixed = diracs({0.0});
  mixed.agents.emplace_back(GaussianMeasure(Vector::Zero(1), Matrix::Identity(1, 1)));
  EXPECT_THROW(mixed.validate(), std::invalid_argument);
}

TEST(StopCriteria, RejectsNegativeValues) {
  StopCriteria s;
  s.max_rounds = -1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Step, IdenticalAgentsStayPut) {
  std::mt19937_64 rng(1);
  GaussianMeasure g(Vector::Constant(2, 0.5), oracle::random_spd(2, 0.5, 2, rng));
  ConsensusState s;
  for (int i = 0; i < 4; ++i) s.agents.emplace_back(g);
  auto sched = generate_schedule(ScheduleKind::random_jointly_connected, 4, 2, 0.1, 3, 20);
  auto trace = run(s, sched, closed_form(), StopCriteria{20, 0.0}, 0);
  for (const auto& e : trace.entries) {
    for (const auto& a : e.state.agents) {
      EXPECT_LE((a.gaussian().mean() - g.mean()).norm(), 1e-12);
      EXPECT_LE((a.gaussian().covariance() - g.covariance()).norm(), 1e-10);
    }
    EXPECT_LE(e.metrics.diameter, 1e-6);
  }
}

TEST(Step, DiracsOnCompleteGraphAverageInOneRound) {
  auto s = diracs({0.0, 1.0, 2.0});
  auto sched = generate_schedule(ScheduleKind::complete, 3, 1, 1.0 / 3.0, 0, 1);
  SolverConfig cfg;
  cfg.method = TransportMethod::exact_lp;
  auto next = step(s, sched, cfg, 0);
  EXPECT_EQ(next.t, 1);
  for (const auto& a : next.agents) {
    ASSERT_EQ(a.discrete().size(), 1);
    EXPECT_NEAR(a.discrete().atoms()(0, 0), 1.0, 1e-12);
  }
}

TEST(Step, IsolatedAgentIsUnchanged) {
  Matrix W = Matrix::Identity(3, 3);
  W(0, 0) = W(0, 1) = W(1, 0) = W(1, 1) = 0.5;
  GraphSchedule sched(3, {W}, {0, 1}, 1, 0.5, true);
  std::mt19937_64 rng(2);
  auto s = random_gaussians(3, 2, rng);
  auto next = step(s, sched, closed_form(), 0);
  EXPECT_TRUE(next.agents[2] == s.agents[2]);
  EXPECT_TRUE(next.agents[0].gaussian().mean().isApprox(
      0.5 * (s.agents[0].gaussian().mean() + s.agents[1].gaussian().mean())));
}

TEST(Step, MatchesVectorConsensusOnMeans) {
  std::mt19937_64 rng(4);
  auto s = random_gaussians(5, 2, rng);
  auto sched = generate_schedule(ScheduleKind::random_jointly_connected, 5, 3, 0.1, 8, 10);
  Matrix means(5, 2);
  for (int i = 0; i < 5; ++i) means.row(i) = s.agents[i].gaussian().mean().transpose();
  for (std::int64_t t = 0; t < 10; ++t) {
    s = step(s, sched, closed_form(), 0);
    means = oracle::vector_consensus_step(sched.weights_at(t), means);
    for (int i = 0; i < 5; ++i)
      EXPECT_LE((s.agents[i].gaussian().mean() - means.row(i).transpose()).norm(), 1e-10);
  }
}

TEST(Run, GaussianExampleConvergesMonotonically) {
  std::mt19937_64 rng(42);
  auto s = random_gaussians(5, 2, rng);
  auto sched = generate_schedule(ScheduleKind::random_jointly_connected, 5, 3, 0.1, 42, 500);
  auto trace = run(s, sched, closed_form(), StopCriteria{500, 1e-8}, 0);
  ASSERT_TRUE(trace.converged);
  EXPECT_LE(trace.entries.back().metrics.diameter, 1e-8);
  for (std::size_t k = 1; k < trace.entries.size(); ++k) {
    EXPECT_LE(trace.entries[k].metrics.v2_max, trace.entries[k - 1].metrics.v2_max + 1e-9);
    EXPECT_LE(trace.entries[k].metrics.max_jensen_residual(), 1e-8);
  }
}

TEST(Run, TwoCliquesPlateau) {
  ConsensusState s;
  for (double m : {0.0, 0.1, 1.0, 1.1})
    s.agents.emplace_back(GaussianMeasure(Vector::Constant(1, m), Matrix::Identity(1, 1)));
  Matrix W = Matrix::Zero(4, 4);
  W.block(0, 0, 2, 2).setConstant(0.5);
  W.block(2, 2, 2, 2).setConstant(0.5);
  GraphSchedule sched(4, {W}, {0, 1}, 1, 0.5, true);
  auto trace = run(s, sched, closed_form(), StopCriteria{50, 1e-8}, 0);
  EXPECT_FALSE(trace.converged);
  EXPECT_EQ(trace.entries.size(), 51u);
  EXPECT_NEAR(trace.entries.back().metrics.diameter, 1.0, 1e-12);
}

TEST(Run, ObserverSeesEveryEntry) {
  std::mt19937_64 rng(5);
  auto s = random_gaussians(3, 1, rng);
  auto sched = generate_schedule(ScheduleKind::complete, 3, 1, 1.0 / 3.0, 0, 5);
  std::vector<std::int64_t> seen;
  auto trace = run(s, sched, closed_form(), StopCriteria{5, 0.0}, 0,
                   [&](const TraceEntry& e) { seen.push_back(e.state.t); });
  ASSERT_EQ(seen.size(), trace.entries.size());
  for (std::size_t k = 0; k < seen.size(); ++k) EXPECT_EQ(seen[k], static_cast<std::int64_t>(k));
}

TEST(Run, SolverFailureIsReportedWithRoundAndAgent) {
  std::mt19937_64 rng(6);
  auto s = random_gaussians(3, 2, rng);
  auto sched = generate_schedule(ScheduleKind::complete, 3, 1, 1.0 / 3.0, 0, 5);
  auto cfg = closed_form();
  cfg.fixed_point_max_iters = 1;
  cfg.fixed_point_tolerance = 1e-300;
  try {
    run(s, sched, cfg, StopCriteria{5, 0.0}, 0);
    FAIL() << "expected RoundError";
  } catch (const RoundError& e) {
    EXPECT_EQ(e.round(), 0);
    EXPECT_GE(e.agent(), 0);
  }
}

TEST(CheckJensen, IdenticalInputsGiveZero) {
  std::mt19937_64 rng(7);
  GaussianMeasure g(oracle::random_vector(2, -1, 1, rng), oracle::random_spd(2, 0.5, 2, rng));
  std::vector<Measure> ms{g, g, g};
  EXPECT_NEAR(check_jensen(ms, {0.2, 0.3, 0.5}, g, 2.0, closed_form()), 0.0, 1e-10);
}

TEST(CheckJensen, NonpositiveOnRandomGaussianTriples) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 3;
    std::vector<Measure> ms;
    std::vector<double> w;
    double total = 0;
    for (int j = 0; j < 3; ++j) {
      ms.emplace_back(GaussianMeasure(oracle::random_vector(d, -1, 1, rng),
                                      oracle::random_spd(d, 0.5, 2, rng)));
      w.push_back(u(rng));
      total += w.back();
    }
    for (auto& x : w) x /= total;
    BarycenterProblem p(ms, w);
    auto b = bar(p, closed_form(), 0);
    EXPECT_LE(check_jensen(ms, w, b, 2.0, closed_form()), 1e-8);
  }
}

TEST(CheckJensen, DetectsWrongBarycenter) {
  std::vector<Measure> ms{DiscreteMeasure::dirac(Vector::Constant(1, 0.0)),
                          DiscreteMeasure::dirac(Vector::Constant(1, 2.0))};
  // Midpoint: 1 - 2 + (1 + 1) / 2 = 0. At 1.5: 2.25 - 2 + (2.25 + 0.25) / 2 = 1.5.
  SolverConfig cfg;
  cfg.method = TransportMethod::exact_lp;
  EXPECT_NEAR(check_jensen(ms, {0.5, 0.5}, DiscreteMeasure::dirac(Vector::Constant(1, 1.0)), 2.0,
                           cfg),
              0.0, 1e-12);
  const double r =
      check_jensen(ms, {0.5, 0.5}, DiscreteMeasure::dirac(Vector::Constant(1, 1.5)), 2.0, cfg);
  EXPECT_NEAR(r, 1.5, 1e-12);
}

TEST(FunctionalTrace, IdentityEqualsSecondMoments) {
  std::mt19937_64 rng(9);
  auto s = random_gaussians(4, 2, rng);
  auto sched = generate_schedule(ScheduleKind::complete, 4, 1, 0.25, 0, 5);
  auto trace = run(s, sched, closed_form(), StopCriteria{5, 0.0}, 0);
  Matrix F = functional_trace(trace, Matrix::Identity(2, 2), Vector::Zero(2), 0.0);
  ASSERT_EQ(F.rows(), static_cast<Eigen::Index>(trace.entries.size()));
  for (Eigen::Index t = 0; t < F.rows(); ++t)
    for (int i = 0; i < 4; ++i)
      EXPECT_NEAR(F(t, i), trace.entries[static_cast<std::size_t>(t)].metrics.v2[i], 1e-12);
  Matrix C = functional_trace(trace, Matrix::Zero(2, 2), Vector::Zero(2), 3.0);
  EXPECT_TRUE((C.array() == 3.0).all());
}

TEST(FunctionalTrace, ConvexFunctionalMaxIsMonotone) {
  std::mt19937_64 rng(10);
  auto s = random_gaussians(5, 2, rng);
  auto sched = generate_schedule(ScheduleKind::random_jointly_connected, 5, 2, 0.1, 1, 40);
  auto trace = run(s, sched, closed_form(), StopCriteria{40, 0.0}, 0);
  Matrix Q(2, 2);
  Q << 2, 0.5, 0.5, 1;
  Matrix F = functional_trace(trace, Q, Vector::Constant(2, 0.3), 1.0);
  for (Eigen::Index t = 1; t < F.rows(); ++t)
    EXPECT_LE(F.row(t).maxCoeff(), F.row(t - 1).maxCoeff() + 1e-9);
}

TEST(FunctionalTrace, RejectsIndefiniteQ) {
  std::mt19937_64 rng(11);
  auto s = random_gaussians(2, 2, rng);
  auto sched = generate_schedule(ScheduleKind::complete, 2, 1, 0.5, 0, 1);
  auto trace = run(s, sched, closed_form(), StopCriteria{1, 0.0}, 0);
  Matrix Q(2, 2);
  Q << 1, 0, 0, -1;
  EXPECT_THROW(functional_trace(trace, Q, Vector::Zero(2), 0.0), std::invalid_argument);
}

TEST(Diameter, MaxPairwiseDistance) {
  auto s = diracs({0.0, 0.5, 3.0});
  SolverConfig cfg;
  EXPECT_DOUBLE_EQ(diameter(s, cfg), 3.0);
  Matrix D = pairwise_w2(s.agents, cfg);
  EXPECT_TRUE(D.isApprox(D.transpose()));
  EXPECT_EQ(D.diagonal().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(D(0, 1), 0.5);
}

TEST(Run, DeterministicAcrossRunsAndThreadCounts) {
  std::mt19937_64 rng(12);
  ConsensusState s;
  for (int i = 0; i < 4; ++i) {
    Matrix atoms = Matrix::NullaryExpr(8, 2, [&] {
      return std::uniform_real_distribution<double>(-1, 1)(rng);
    });
    s.agents.emplace_back(DiscreteMeasure::uniform(atoms));
  }
  auto sched = generate_schedule(ScheduleKind::ring_rotating, 4, 3, 0.5, 0, 6);
  SolverConfig cfg;
  cfg.method = TransportMethod::exact_lp;
  cfg.support_size = 8;
  auto a = run(s, sched, cfg, StopCriteria{6, 0.0}, 77);
  cfg.threads = 4;
  auto b = run(s, sched, cfg, StopCriteria{6, 0.0}, 77);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t k = 0; k < a.entries.size(); ++k)
    for (std::size_t i = 0; i < 4; ++i)
      EXPECT_TRUE(a.entries[k].state.agents[i] == b.entries[k].state.agents[i]);
}

TEST(Run, PermutationEquivariant) {
  std::mt19937_64 rng(13);
  auto s = random_gaussians(4, 2, rng);
  auto sched = generate_schedule(ScheduleKind::random_jointly_connected, 4, 2, 0.1, 5, 10);
  const std::vector<int> perm{2, 0, 3, 1};  // new index k holds old agent perm[k]
  ConsensusState ps;
  for (int k = 0; k < 4; ++k) ps.agents.push_back(s.agents[perm[k]]);
  std::vector<Matrix> rounds;
  for (std::int64_t t = 0; t < 10; ++t) {
    const Matrix& W = sched.weights_at(t);
    Matrix P(4, 4);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) P(a, b) = W(perm[a], perm[b]);
    rounds.push_back(P);
  }
  GraphSchedule psched(4, rounds, sched.partition(), sched.L(), sched.delta());
  auto a = run(s, sched, closed_form(), StopCriteria{10, 0.0}, 0);
  auto b = run(ps, psched, closed_form(), StopCriteria{10, 0.0}, 0);
  for (std::size_t t = 0; t < a.entries.size(); ++t) {
    for (int k = 0; k < 4; ++k) {
      const auto& x = a.entries[t].state.agents[static_cast<std::size_t>(perm[k])].gaussian();
      const auto& y = b.entries[t].state.agents[static_cast<std::size_t>(k)].gaussian();
      EXPECT_LE((x.mean() - y.mean()).norm(), 1e-9);
      EXPECT_LE((x.covariance() - y.covariance()).norm(), 1e-9);
    }
  }
}

TEST(CheckTrace, AcceptsEngineOutput) {
  std::mt19937_64 rng(14);
  auto s = random_gaussians(4, 2, rng);
  auto sched = generate_schedule(ScheduleKind::random_jointly_connected, 4, 2, 0.1, 2, 200);
  auto trace = run(s, sched, closed_form(), StopCriteria{200, 1e-8}, 0);
  TraceCheckOptions opts;
  opts.tolerances = tolerance_ladder(MeasureKind::gaussian, TransportMethod::closed_form);
  opts.diameter_threshold = 1e-8;
  auto report = check_trace(trace_rows(trace), trace_snapshots(trace), sched, closed_form(), opts);
  EXPECT_TRUE(report.ok()) << (report.violations.empty() ? "" : report.violations.front());
  EXPECT_EQ(report.rows_checked, static_cast<std::int64_t>(trace.entries.size()));
  EXPECT_EQ(report.snapshot_pairs_checked, static_cast<std::int64_t>(trace.entries.size()) - 1);
}

TEST(CheckTrace, FlagsCorruptedRows) {
  std::mt19937_64 rng(15);
  auto s = random_gaussians(4, 1, rng);
  auto sched = generate_schedule(ScheduleKind::random_jointly_connected, 4, 2, 0.1, 3, 8);
  auto trace = run(s, sched, closed_form(), StopCriteria{8, 0.0}, 0);
  TraceCheckOptions opts;
  auto rows = trace_rows(trace);
  ASSERT_GT(rows.size(), 4u);
  EXPECT_TRUE(check_trace(rows, {}, sched, closed_form(), opts).ok());
  rows[3].v2_max = rows[2].v2_max + 1.0;
  rows[3].v2[0] = rows[3].v2_max;
  auto report = check_trace(rows, {}, sched, closed_form(), opts);
  EXPECT_FALSE(report.ok());
}

#include <cmath>
#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>

#include "qswld/trajectory.hpp"
#include "test_support.hpp"

namespace qswld {
namespace {

QswModel two_node(double coherent_weight = 1.0) { return build_qsw(parse_edge_list("0 1"), 0.85, coherent_weight); }

ComplexVector uniform_state(std::size_t n) {
  return ComplexVector::Constant(static_cast<Eigen::Index>(n), Complex(1.0 / std::sqrt(static_cast<double>(n))));
}

TEST(Simulate, SingleNodeIsUnitRatePoisson) {
  const auto m = build_qsw(parse_edge_list("n 1"));
  const double t = 2000.0;
  const auto rec = simulate(m, uniform_state(1), t, 1e-2, 17);
  const double rate = static_cast<double>(rec.counts[0]) / t;
  EXPECT_NEAR(rate, 1.0, 5.0 * std::sqrt(1.0 / t));
}

TEST(Simulate, RecordInvariants) {
  const auto m = build_qsw(testing::load_graph("six_node.edges"));
  const auto rec = simulate(m, uniform_state(6), 50.0, 1e-3, 5);
  ASSERT_FALSE(rec.jump_events.empty());
  std::uint64_t total = 0;
  for (auto c : rec.counts) total += c;
  EXPECT_EQ(total, rec.jump_events.size());
  std::vector<std::uint64_t> recount(6, 0);
  double prev = 0.0;
  for (const auto& e : rec.jump_events) {
    EXPECT_GT(e.time, prev);
    EXPECT_LE(e.time, rec.t_final);
    prev = e.time;
    ++recount[e.dst];
  }
  EXPECT_EQ(recount, rec.counts);
}

TEST(Simulate, DeterministicPerSeedAndStream) {
  const auto m = two_node();
  const auto a = simulate(m, uniform_state(2), 30.0, 1e-3, 99, 3);
  const auto b = simulate(m, uniform_state(2), 30.0, 1e-3, 99, 3);
  const auto c = simulate(m, uniform_state(2), 30.0, 1e-3, 99, 4);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
}

TEST(Simulate, ClassicalLimitFollowsEmbeddedChain) {
  const auto m = two_node(0.0);
  const auto rec = simulate(m, ComplexVector::Unit(2, 0), 20000.0, 1e-2, 3);
  // Without H the walker sits on a node between jumps: each jump starts where
  // the previous one ended.
  std::size_t where = 0;
  std::array<std::array<double, 2>, 2> transitions{};
  for (const auto& e : rec.jump_events) {
    EXPECT_EQ(e.src, where);
    transitions[e.dst][e.src] += 1.0;
    where = e.dst;
  }
  for (std::size_t j = 0; j < 2; ++j) {
    const double from_j = transitions[0][j] + transitions[1][j];
    ASSERT_GT(from_j, 1000.0);
    for (std::size_t i = 0; i < 2; ++i) {
      const double p = m.google()(i, j);
      EXPECT_NEAR(transitions[i][j] / from_j, p, 5.0 * std::sqrt(p * (1 - p) / from_j));
    }
  }
}

TEST(Simulate, UnstableStepIsReportedAsNormGrowth) {
  // RK4 is unstable for |dt * lambda| beyond ~2.8 on the imaginary axis.
  const auto m = build_qsw(parse_edge_list("0 1\n1 0"), 0.85, 10.0);
  EXPECT_THROW(simulate(m, ComplexVector::Unit(2, 0), 10.0, 2.0, 1), ModelError);
}

TEST(Simulate, RejectsInvalidInput) {
  const auto m = two_node();
  EXPECT_THROW(simulate(m, ComplexVector::Ones(2), 1.0), DomainError);
  EXPECT_THROW(simulate(m, ComplexVector::Unit(3, 0), 1.0), ShapeError);
  EXPECT_THROW(simulate(m, ComplexVector::Unit(2, 0), 0.0), DomainError);
}

TEST(Simulate, EventLogCsv) {
  const auto rec = simulate(two_node(), uniform_state(2), 5.0, 1e-3, 1);
  std::ostringstream os;
  write_events_csv(os, rec);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, 13), "time,dst,src\n");
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), rec.jump_events.size() + 1);
}

TEST(EnsembleStats, SingleNodePoissonStatistics) {
  const auto m = build_qsw(parse_edge_list("n 1"));
  const auto st = ensemble_stats(m, uniform_state(1), 50.0, 1e-2, 2000, 11);
  EXPECT_NEAR(st.mean_rate[0], 1.0, 3.0 * st.standard_errors[0]);
  EXPECT_NEAR(st.dispersion_hat[0], 1.0, 5.0 * st.dispersion_standard_errors[0]);
  EXPECT_LT(st.dispersion_standard_errors[0], 0.1);
}

TEST(EnsembleStats, TwoNodeMatchesActivity) {
  const auto m = two_node();
  const auto st = ensemble_stats(m, InitialCondition::steady(m), 50.0, 1e-2, 1000, 21);
  const auto alpha = activity(m, TiltVector::zero(2));
  const auto disp = dispersion(m, TiltVector::zero(2));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(st.mean_rate[i], alpha[i], 4.0 * st.standard_errors[i]);
    EXPECT_NEAR(st.dispersion_hat[i], *disp.delta[i], 5.0 * st.dispersion_standard_errors[i]);
  }
}

TEST(EnsembleStats, IndependentOfWorkerCount) {
  const auto m = two_node();
  ::setenv("QSWLD_WORKERS", "1", 1);
  const auto serial = ensemble_stats(m, uniform_state(2), 10.0, 1e-2, 50, 5);
  ::setenv("QSWLD_WORKERS", "4", 1);
  const auto parallel = ensemble_stats(m, uniform_state(2), 10.0, 1e-2, 50, 5);
  ::unsetenv("QSWLD_WORKERS");
  EXPECT_EQ(serial.mean_rate, parallel.mean_rate);
  EXPECT_EQ(serial.var_rate, parallel.var_rate);
}

TEST(EnsembleStats, NeedsTwoTrajectories) {
  EXPECT_THROW(ensemble_stats(two_node(), uniform_state(2), 1.0, 1e-2, 1, 0), DomainError);
}

TEST(Unraveling, AverageReproducesMasterEquation) {
  const auto m = two_node();
  const ComplexVector psi0 = ComplexVector::Unit(2, 0);
  const std::vector<double> times = {0.5, 1.5, 3.0};
  const auto avg = unraveling_average(m, InitialCondition::pure(psi0), times, 1e-3, 10000, 8);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto rho = evolve(m, DensityMatrix::pure(psi0), times[k], 1e-3);
    for (Eigen::Index r = 0; r < 2; ++r) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        const double se = std::max(avg.standard_error[k](r, c), 1e-12);
        EXPECT_LE(std::abs(avg.mean[k](r, c) - rho.matrix()(r, c)), 5.0 * se) << "t=" << times[k];
      }
    }
  }
}

TEST(ThetaByIntegration, ZeroTiltHasZeroSlope) {
  const auto m = build_qsw(testing::load_graph("six_node.edges"));
  EXPECT_NEAR(theta_by_integration(m, TiltVector::zero(6), 20.0, 1e-2).theta, 0.0, 1e-6);
}

TEST(ThetaByIntegration, SingleNodeClosedForm) {
  const auto m = build_qsw(parse_edge_list("n 1"));
  EXPECT_NEAR(theta_by_integration(m, TiltVector({1.0}), 10.0, 1e-2).theta, std::exp(-1.0) - 1.0, 1e-6);
}

TEST(ThetaByIntegration, AgreesWithEigenvaluePath) {
  const auto m = two_node();
  for (const auto& s : {TiltVector::uniform(2, -1.0), TiltVector({0.7, -0.4})}) {
    const auto r = theta_by_integration(m, s, 60.0, 1e-2);
    EXPECT_GT(r.spectral_gap * 0.2 * 60.0, 5.0);
    EXPECT_NEAR(r.theta, theta(m, s), 1e-3);
  }
}

TEST(ThetaByIntegration, RenormalizationPeriodDoesNotMatter) {
  const auto m = build_qsw(testing::load_graph("six_node.edges"));
  const TiltVector s = TiltVector::uniform(6, -2.0);
  const auto every = theta_by_integration(m, s, 10.0, 1e-2, LimitMode::none, 50, 1);
  const auto sparse = theta_by_integration(m, s, 10.0, 1e-2, LimitMode::none, 50, 7);
  ASSERT_EQ(every.log_trace.size(), sparse.log_trace.size());
  for (std::size_t k = 0; k < every.log_trace.size(); ++k) {
    EXPECT_NEAR(every.log_trace[k], sparse.log_trace[k], 1e-9);
  }
}

}  // namespace
}  // namespace qswld

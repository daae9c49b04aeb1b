#include <gtest/gtest.h>

#include "support/oracles.hpp"

using namespace drtoll;

namespace {

KktBlocks pigou_blocks() {
  return kkt_blocks(incidence(make_network(2, {{1, 2}, {1, 2}}, 100.0)),
                    LatencyModel{Vector{{1.5, 0.1}}});
}

KktBlocks single_edge_blocks() {
  return kkt_blocks(incidence(make_network(2, {{1, 2}}, 5.0)), LatencyModel{Vector{{2.0}}});
}

}  // namespace

TEST(Kkt, PigouBlocks) {
  const auto b = pigou_blocks();
  EXPECT_TRUE(b.Gamma.isApprox(Matrix{{0.625, -0.625}, {-0.625, 0.625}}, 1e-14));
  EXPECT_NEAR(b.gamma_norm, 1.25, 1e-14);
  EXPECT_NEAR(b.S(0, 0), 0.09375, 1e-15);
  EXPECT_TRUE(b.c.isApprox(Vector{{6.25, 93.75}}, 1e-14));
}

TEST(Kkt, SingleEdge) {
  const auto b = single_edge_blocks();
  EXPECT_NEAR(b.Gamma(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(b.gamma_norm, 0.0, 1e-15);
  EXPECT_NEAR(b.c[0], 5.0, 1e-14);
}

TEST(Kkt, BraessMatchesDenseInverse) {
  const Network net = make_network(4, {{1, 2}, {1, 3}, {2, 4}, {3, 4}, {2, 3}}, 1.0);
  const auto inc = incidence(net);
  const LatencyModel lat{Vector::Ones(5)};
  const auto b = kkt_blocks(inc, lat);
  const Matrix dense = oracle::dense_kkt_inverse(inc.R, lat.beta);
  EXPECT_LE((b.inverse() - dense).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((b.Gamma * inc.R.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(b.Gamma).eigenvalues().minCoeff(), -1e-12);
}

TEST(Kkt, RejectsBadLatency) {
  const auto inc = incidence(make_network(2, {{1, 2}, {1, 2}}, 1.0));
  EXPECT_THROW(kkt_blocks(inc, LatencyModel{Vector{{1.0, 0.0}}}), InvalidInput);
  EXPECT_THROW(kkt_blocks(inc, LatencyModel{Vector{{1.0}}}), InvalidInput);
}

TEST(ClosedForm, PigouExamples) {
  const auto b = pigou_blocks();
  const auto s0 = nash_flow_closed_form(b, Vector{{20, 30}}, Vector::Zero(2));
  EXPECT_TRUE(s0.flow.isApprox(Vector{{12.5, 87.5}}, 1e-13));
  // Wardrop: both edges cost 38.75
  const Vector cost = b.beta.cwiseProduct(s0.flow) + Vector{{20, 30}};
  EXPECT_NEAR(cost[0], 38.75, 1e-12);
  EXPECT_NEAR(cost[1], 38.75, 1e-12);
  EXPECT_NEAR(-s0.node_potentials[0], 38.75, 1e-12);

  const auto s1 = nash_flow_closed_form(b, Vector{{20, 30}}, Vector{{5, 0}});
  EXPECT_TRUE(s1.flow.isApprox(Vector{{9.375, 90.625}}, 1e-13));
}

TEST(ClosedForm, SingleEdgeIgnoresLoad) {
  const auto b = single_edge_blocks();
  for (const double a : {-3.0, 0.0, 12.0}) {
    EXPECT_NEAR(nash_flow_closed_form(b, Vector{{a}}, Vector{{2.0}}).flow[0], 5.0, 1e-13);
  }
}

TEST(ClosedForm, OutOfRegime) {
  const auto b = pigou_blocks();
  try {
    nash_flow_closed_form(b, Vector{{0, 200}}, Vector::Zero(2));
    FAIL() << "expected OutOfRegime";
  } catch (const OutOfRegime& e) {
    EXPECT_NEAR(e.min_flow(), -31.25, 1e-10);
  }
  EXPECT_THROW(nash_flow_closed_form(b, Vector{{0}}, Vector::Zero(2)), InvalidInput);
}

TEST(Potential, PigouExamples) {
  const auto inc = incidence(make_network(2, {{1, 2}, {1, 2}}, 100.0));
  const LatencyModel lat{Vector{{1.5, 0.1}}};
  const auto s0 = nash_flow_potential(inc, lat, Vector{{20, 30}}, Vector::Zero(2));
  EXPECT_LE((s0.flow - Vector{{12.5, 87.5}}).cwiseAbs().maxCoeff(), 1e-9);
  const auto s1 = nash_flow_potential(inc, lat, Vector{{0, 200}}, Vector::Zero(2));
  EXPECT_LE((s1.flow - Vector{{100, 0}}).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Potential, SingleEdge) {
  const auto inc = incidence(make_network(2, {{1, 2}}, 5.0));
  const auto s = nash_flow_potential(inc, LatencyModel{Vector{{2.0}}}, Vector{{1.0}},
                                     Vector{{3.0}});
  EXPECT_NEAR(s.flow[0], 5.0, 1e-12);
}

TEST(Potential, WarmStartGivesSameAnswer) {
  const auto inc = incidence(make_network(2, {{1, 2}, {1, 2}}, 100.0));
  const LatencyModel lat{Vector{{1.5, 0.1}}};
  const auto cold = nash_flow_potential(inc, lat, Vector{{20, 30}}, Vector{{1, 0}});
  const auto warm = nash_flow_potential(inc, lat, Vector{{20, 30}}, Vector{{1, 0}},
                                        Vector{{50.0, 50.0}});
  EXPECT_LE((cold.flow - warm.flow).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SystemLatency, Examples) {
  const LatencyModel pig{Vector{{1.5, 0.1}}};
  EXPECT_NEAR(system_latency(Vector{{12.5, 87.5}}, pig, Vector{{20, 30}}), 3875.0, 1e-9);
  EXPECT_EQ(system_latency(Vector::Zero(2), pig, Vector{{20, 30}}), 0.0);
  EXPECT_NEAR(system_latency(Vector{{5.0}}, LatencyModel{Vector{{2.0}}}, Vector{{1.0}}), 55.0,
              1e-12);
  EXPECT_THROW(system_latency(Vector{{1.0}}, pig, Vector{{1, 2}}), InvalidInput);
}

TEST(Decomposition, PigouExamples) {
  const auto b = pigou_blocks();
  const auto d0 = latency_decomposition(b, Vector::Zero(2));
  EXPECT_TRUE(d0.q.isApprox(Vector{{6.25, 93.75}}, 1e-13));
  EXPECT_NEAR(d0.q0, 937.5, 1e-10);
  const auto d1 = latency_decomposition(b, Vector{{5, 0}});
  EXPECT_TRUE(d1.q.isApprox(Vector{{9.375, 90.625}}, 1e-13));
  EXPECT_NEAR(d1.q0, 953.125, 1e-10);
  const auto d2 = latency_decomposition(b, Vector{{6, 1}});
  EXPECT_TRUE(d2.q.isApprox(d1.q, 1e-13));
  EXPECT_NEAR(d2.q0, 953.125, 1e-10);
}

TEST(LatencyG, Examples) {
  const auto b = pigou_blocks();
  EXPECT_NEAR(equilibrium_latency_g(b, Vector{{20, 30}}, Vector::Zero(2)), 3875.0, 1e-9);
  EXPECT_NEAR(equilibrium_latency_g(b, Vector{{20, 30}}, Vector{{5, 0}}), 3859.375, 1e-9);
  const auto s = single_edge_blocks();
  EXPECT_NEAR(equilibrium_latency_g(s, Vector{{1.0}}, Vector{{3.0}}), 55.0, 1e-11);
  EXPECT_THROW(equilibrium_latency_g(b, Vector{{0, 200}}, Vector::Zero(2)), OutOfRegime);
}

TEST(EquilibriumProperty, BlocksAgainstDenseInverse) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 100; ++t) {
    const auto inst = oracle::random_instance(rng, 2, 9);
    const auto inc = incidence(inst.net);
    const auto b = kkt_blocks(inc, inst.lat);
    const Matrix dense = oracle::dense_kkt_inverse(inc.R, inst.lat.beta);
    const double scale = 1.0 + dense.cwiseAbs().maxCoeff();
    EXPECT_LE((b.inverse() - dense).cwiseAbs().maxCoeff(), 1e-10 * scale);
    EXPECT_LE((b.inverse() * b.kkt_matrix() -
               Matrix::Identity(b.kkt_matrix().rows(), b.kkt_matrix().rows()))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-9);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(b.S).eigenvalues().minCoeff(), 0.0);
    EXPECT_LE((b.Gamma - b.Gamma.transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(EquilibriumProperty, ClosedFormMatchesKktSolveAndWardrop) {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 100; ++t) {
    const auto inst = oracle::random_instance(rng, 2, 9);
    const auto inc = incidence(inst.net);
    const auto b = kkt_blocks(inc, inst.lat);
    const Vector alpha = inst.model.mean;
    const auto s = nash_flow_closed_form(b, alpha, inst.tau0);
    EXPECT_LE((s.flow - inst.f0).cwiseAbs().maxCoeff(), 1e-8 * (1.0 + inst.f0.maxCoeff()));
    const auto [f, nu] = oracle::kkt_solve(inc.R, inst.lat.beta, inc.eta, alpha + inst.tau0);
    EXPECT_LE((s.flow - f).cwiseAbs().maxCoeff(), 1e-8 * (1.0 + f.maxCoeff()));
    EXPECT_LE((s.node_potentials - nu).cwiseAbs().maxCoeff(),
              1e-8 * (1.0 + nu.cwiseAbs().maxCoeff()));
    const Vector cost = inst.lat.beta.cwiseProduct(s.flow) + alpha + inst.tau0;
    EXPECT_LE(oracle::wardrop_violation(inst.net, cost, s.flow, 1e-9),
              1e-8 * (1.0 + cost.cwiseAbs().maxCoeff()));
  }
}

TEST(EquilibriumProperty, NullspaceShiftLeavesEverythingUnchanged) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 50; ++t) {
    const auto inst = oracle::random_instance(rng);
    const auto inc = incidence(inst.net);
    const auto b = kkt_blocks(inc, inst.lat);
    Vector v(inc.R.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
    const Vector shifted = inst.tau0 + inc.R.transpose() * v;
    const auto d0 = latency_decomposition(b, inst.tau0);
    const auto d1 = latency_decomposition(b, shifted);
    EXPECT_LE((d0.q - d1.q).cwiseAbs().maxCoeff(), 1e-8 * (1.0 + d0.q.norm()));
    EXPECT_NEAR(d0.q0, d1.q0, 1e-8 * (1.0 + std::abs(d0.q0)));
    const auto f0 = nash_flow_closed_form(b, inst.model.mean, inst.tau0).flow;
    const auto f1 = nash_flow_closed_form(b, inst.model.mean, shifted).flow;
    EXPECT_LE((f0 - f1).cwiseAbs().maxCoeff(), 1e-8 * (1.0 + f0.maxCoeff()));
  }
}

TEST(EquilibriumProperty, PotentialOracleAgreesOutsideTheRegimeWithWardrop) {
  // Large random disturbances push some edges to zero flow.
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.0, 60.0);
  int boundary = 0;
  for (int t = 0; t < 60; ++t) {
    const auto inst = oracle::random_instance(rng);
    const auto inc = incidence(inst.net);
    Vector alpha(inst.net.num_edges());
    for (Eigen::Index k = 0; k < alpha.size(); ++k) alpha[k] = u(rng);
    const Vector tau = Vector::Zero(alpha.size());
    const auto s = nash_flow_potential(inc, inst.lat, alpha, tau);
    EXPECT_TRUE(is_feasible_flow(inc, s.flow, 1e-8));
    const Vector cost = inst.lat.beta.cwiseProduct(s.flow) + alpha + tau;
    EXPECT_LE(oracle::wardrop_violation(inst.net, cost, s.flow, 1e-7), 1e-6);
    if (s.flow.minCoeff() < 1e-9) ++boundary;
  }
  EXPECT_GT(boundary, 0);
}

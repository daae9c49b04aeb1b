#include <gtest/gtest.h>

#include "support/oracles.hpp"

using namespace drtoll;

namespace {

const oracle::TwoEdge kPigou{1.5, 0.1, 100.0, Vector{{20.0, 30.0}}, 0.2};

ExperimentGrid run(std::size_t n, std::uint64_t seed, unsigned threads = 1,
                   std::vector<double> grid = {0, 10, 20, 30}) {
  ExperimentConfig cfg;
  cfg.grid = std::move(grid);
  cfg.mc_samples = n;
  cfg.seed = seed;
  cfg.threads = threads;
  return run_experiment(kPigou.network(), kPigou.latency(), kPigou.model(), cfg);
}

}  // namespace

TEST(Experiment, ShapeAndSeeds) {
  const auto g = run(20, 1);
  ASSERT_EQ(g.cells.size(), 16u);
  EXPECT_EQ(g.designs.size(), 4u);
  EXPECT_NEAR(g.eps_max, 39.8, 1e-9);
  EXPECT_EQ(g.at(2, 3).eps, 20.0);
  EXPECT_EQ(g.at(2, 3).eps_hat, 30.0);
  EXPECT_EQ(g.at(2, 3).seed, cell_seed(1, 2, 3));
  EXPECT_NE(cell_seed(1, 2, 3), cell_seed(1, 3, 2));
  for (const auto& c : g.cells) {
    EXPECT_EQ(c.samples, 20u);
    EXPECT_EQ(c.out_of_regime, 0u);
    EXPECT_GT(c.min_edge_flow, 0.0);
  }
}

TEST(Experiment, ClosedFormExpectationMatchesHandValues) {
  const auto g = run(1, 0);
  const double want[4][4] = {{3859.375, 3870.798, 3901.28, 3945.718},
                             {4770.461, 4758.54, 4768.548, 4795.128},
                             {5681.547, 5646.282, 5635.816, 5644.538},
                             {6592.634, 6534.024, 6503.084, 6493.949}};
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(g.at(i, j).expectation, want[i][j], 2e-3) << i << "," << j;
    }
  }
}

TEST(Experiment, RadiusZeroSingleSampleIsExact) {
  oracle::TwoEdge te = kPigou;
  te.delta = 0.0;
  ExperimentConfig cfg;
  cfg.grid = {0, 10, 25};
  cfg.mc_samples = 1;
  const auto g = run_experiment(te.network(), te.latency(), te.model(), cfg);
  for (const auto& c : g.cells) {
    EXPECT_NEAR(c.g_bar, c.expectation, 1e-9 * c.expectation);
    EXPECT_EQ(c.std_error, 0.0);
  }
}

TEST(Experiment, GridAboveEpsMaxIsRejectedUpFront) {
  EXPECT_THROW(run(10, 1, 1, {0, 40}), Infeasible);
  EXPECT_THROW(run(10, 1, 1, {}), InvalidInput);
  EXPECT_THROW(run(0, 1, 1, {0}), InvalidInput);
}

TEST(Experiment, DeterministicAndThreadIndependent) {
  const auto a = run(200, 77);
  const auto b = run(200, 77);
  const auto c = run(200, 77, 4);
  const auto net = kPigou.network();
  EXPECT_EQ(grid_to_csv(a, net), grid_to_csv(b, net));
  EXPECT_EQ(grid_to_csv(a, net), grid_to_csv(c, net));
  EXPECT_NE(grid_to_csv(a, net), grid_to_csv(run(200, 78), net));
}

TEST(Experiment, CsvLayout) {
  const auto g = run(5, 3, 1, {0, 10});
  const std::string csv = grid_to_csv(g, kPigou.network());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "eps,eps_hat,g_bar,stderr,expectation,tau_e1,tau_e2");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Experiment, UnbiasedAcrossSeeds) {
  // At least 15 of 16 cells within 6 standard errors, for each of several seeds.
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    const auto g = run(2000, seed);
    int within = 0;
    for (const auto& c : g.cells) {
      if (std::abs(c.g_bar - c.expectation) <= 6.0 * c.std_error) ++within;
    }
    EXPECT_GE(within, 15) << "seed " << seed;
  }
}

TEST(Experiment, DiagonalDominance) {
  const auto g = run(2000, 9);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (i != j) EXPECT_LT(g.at(i, i).expectation, g.at(i, j).expectation);
    }
    if (i > 0) EXPECT_LE(g.at(i, i).g_bar, g.at(i, 0).g_bar);
  }
}

TEST(Experiment, StandardErrorScale) {
  // g is affine in alpha, so the spread is ||q|| times the radial spread of
  // the ball draw: sd = ||q|| delta / 2 in two dimensions.
  const auto g = run(20000, 4, 1, {0});
  const auto& c = g.at(0, 0);
  const double q = latency_decomposition(
                       kkt_blocks(incidence(kPigou.network()), kPigou.latency()), c.tau_star)
                       .q.norm();
  EXPECT_NEAR(c.std_error * std::sqrt(20000.0), q * 0.2 / 2.0, 0.03 * q * 0.1);
}

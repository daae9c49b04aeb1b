#pragma once

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "drtoll/design.hpp"
#include "drtoll/equilibrium.hpp"
#include "drtoll/error.hpp"
#include "drtoll/network.hpp"
#include "drtoll/rng.hpp"
#include "drtoll/uncertainty.hpp"

namespace drtoll {

/// One (actual eps, anticipated eps_hat) pair of the latency grid.
struct ExperimentCell {
  std::size_t row = 0;  // index of eps (actual shift)
  std::size_t col = 0;  // index of eps_hat (anticipated shift)
  double eps = 0.0;
  double eps_hat = 0.0;
  double g_bar = 0.0;        // Monte Carlo mean of the equilibrium latency
  double std_error = 0.0;    // sample stdev / sqrt(N)
  double expectation = 0.0;  // eps ||q|| + q^T theta_hat + q0
  Vector tau_star;
  Vector shifted_mean;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  /// Draws whose closed-form flow was negative; evaluated with the potential
  /// oracle instead.
  std::size_t out_of_regime = 0;
  double min_edge_flow = 0.0;
};

struct ExperimentGrid {
  std::vector<double> eps_values;
  std::vector<ExperimentCell> cells;  // row-major over (eps, eps_hat)
  std::vector<DesignResult> designs;  // one per eps_hat
  double eps_max = 0.0;
  std::uint64_t seed = 0;
  std::size_t mc_samples = 0;

  const ExperimentCell& at(std::size_t row, std::size_t col) const {
    return cells.at(row * eps_values.size() + col);
  }
};

struct ExperimentConfig {
  std::vector<double> grid;
  std::size_t mc_samples = 10000;
  std::uint64_t seed = 0;
  DesignOptions design;
  unsigned threads = 1;
};

inline std::uint64_t cell_seed(std::uint64_t master, std::size_t row, std::size_t col) {
  return derive_seed(master, {static_cast<std::uint64_t>(row), static_cast<std::uint64_t>(col)});
}

namespace detail {

inline void run_cell(const KktBlocks& b, const IncidenceData& inc, const LatencyModel& lat,
                     const DisturbanceModel& model, ExperimentCell& cell) {
  const WorstCaseShift shift = worst_case_mean(b, cell.tau_star, model, cell.eps);
  cell.shifted_mean = shift.mean;
  const LatencyDecomposition dec = latency_decomposition(b, cell.tau_star);
  cell.expectation = cell.eps * dec.q.norm() + dec.q.dot(model.mean) + dec.q0;

  std::vector<double> values(cell.samples);
  double min_flow = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < cell.samples; ++n) {
    const Vector alpha =
        uniform_ball_draw(shift.mean, model.support_radius, cell.seed, n);
    const Vector flow = -b.Gamma * (alpha + cell.tau_star) + b.c;
    const double fmin = flow.minCoeff();
    if (fmin >= 0.0) {
      values[n] = equilibrium_latency_g(b, alpha, cell.tau_star);
      min_flow = std::min(min_flow, fmin);
    } else {
      const NashSolution ns = nash_flow_potential(inc, lat, alpha, cell.tau_star);
      values[n] = system_latency(ns.flow, lat, alpha);
      min_flow = std::min(min_flow, ns.flow.minCoeff());
      ++cell.out_of_regime;
    }
  }
  double sum = 0.0;
  for (const double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  const double var = values.size() > 1 ? ss / static_cast<double>(values.size() - 1) : 0.0;
  cell.g_bar = mean;
  cell.std_error = std::sqrt(var / static_cast<double>(values.size()));
  cell.min_edge_flow = min_flow;
}

}  // namespace detail

/// For each (eps, eps_hat): design tau*(eps_hat), shift the nominal mean
/// adversarially by eps against that toll, draw N disturbances uniformly from
/// the delta-ball around the shifted mean and average the equilibrium
/// latency. Cell seeds depend only on (seed, row, col), so the result does
/// not depend on `threads`.
inline ExperimentGrid run_experiment(const Network& net, const LatencyModel& lat,
                                     const DisturbanceModel& model,
                                     const ExperimentConfig& cfg) {
  if (cfg.grid.empty()) throw InvalidInput("run_experiment: empty eps grid");
  if (cfg.mc_samples < 1) throw InvalidInput("run_experiment: mc_samples must be >= 1");
  const IncidenceData inc = incidence(net);
  const KktBlocks b = kkt_blocks(inc, lat);
  model.check(b.num_edges());

  ExperimentGrid out;
  out.eps_values = cfg.grid;
  out.seed = cfg.seed;
  out.mc_samples = cfg.mc_samples;
  out.eps_max = epsilon_max(b, model).value;
  for (const double e : cfg.grid) {
    if (!(e >= 0.0) || e > out.eps_max + 1e-9) {
      std::ostringstream os;
      os.precision(12);
      os << "run_experiment: grid value " << e << " lies outside [0, eps_max = "
         << out.eps_max << "]";
      throw Infeasible(os.str(), out.eps_max);
    }
  }

  for (const double e_hat : cfg.grid) {
    out.designs.push_back(solve_dro_tolls(b, model, e_hat, cfg.design));
  }
  const std::size_t k = cfg.grid.size();
  out.cells.resize(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      ExperimentCell& c = out.cells[i * k + j];
      c.row = i;
      c.col = j;
      c.eps = cfg.grid[i];
      c.eps_hat = cfg.grid[j];
      c.tau_star = out.designs[j].tau_star;
      c.seed = cell_seed(cfg.seed, i, j);
      c.samples = cfg.mc_samples;
    }
  }

  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(k * k)));
  if (threads == 1) {
    for (auto& c : out.cells) detail::run_cell(b, inc, lat, model, c);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t c = t; c < out.cells.size(); c += threads) {
            detail::run_cell(b, inc, lat, model, out.cells[c]);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return out;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

/// One row per cell: eps, eps_hat, g_bar, stderr, expectation, tau_<edge>...
inline std::string grid_to_csv(const ExperimentGrid& g, const Network& net) {
  std::ostringstream os;
  os << "eps,eps_hat,g_bar,stderr,expectation";
  for (const Edge& e : net.edges) os << ",tau_" << e.id;
  os << '\n';
  for (const auto& c : g.cells) {
    os << detail::fmt(c.eps) << ',' << detail::fmt(c.eps_hat) << ','
       << detail::fmt(c.g_bar) << ',' << detail::fmt(c.std_error) << ','
       << detail::fmt(c.expectation);
    for (Eigen::Index k = 0; k < c.tau_star.size(); ++k) os << ',' << detail::fmt(c.tau_star[k]);
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json grid_to_json(const ExperimentGrid& g, const Network& net) {
  using nlohmann::json;
  auto vec = [](const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  json edges = json::array();
  for (const Edge& e : net.edges) edges.push_back(e.id);
  json cells = json::array();
  for (const auto& c : g.cells) {
    cells.push_back({{"eps", c.eps},
                     {"eps_hat", c.eps_hat},
                     {"g_bar", c.g_bar},
                     {"stderr", c.std_error},
                     {"expectation", c.expectation},
                     {"tau_star", vec(c.tau_star)},
                     {"shifted_mean", vec(c.shifted_mean)},
                     {"seed", c.seed},
                     {"samples", c.samples},
                     {"out_of_regime", c.out_of_regime},
                     {"min_edge_flow", c.min_edge_flow}});
  }
  return {{"eps_values", g.eps_values},
          {"eps_max", std::isinf(g.eps_max) ? json("+inf") : json(g.eps_max)},
          {"seed", g.seed},
          {"mc_samples", g.mc_samples},
          {"edges", edges},
          {"cells", cells}};
}

/// Rows are actual eps, columns anticipated eps_hat.
inline std::string grid_to_text(const ExperimentGrid& g) {
  std::ostringstream os;
  char buf[64];
  os << "eps \\ eps_hat";
  for (const double e : g.eps_values) {
    std::snprintf(buf, sizeof buf, " | %10.1f", e);
    os << buf;
  }
  os << '\n';
  for (std::size_t i = 0; i < g.eps_values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%13.1f", g.eps_values[i]);
    os << buf;
    for (std::size_t j = 0; j < g.eps_values.size(); ++j) {
      std::snprintf(buf, sizeof buf, " | %10.2f", g.at(i, j).g_bar);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace drtoll

#pragma once

// Command implementations behind the `drtoll` executable. Each command
// writes its result to `out`, diagnostics to `err`, and returns the process
// exit code.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"

#include "drtoll/design.hpp"
#include "drtoll/equilibrium.hpp"
#include "drtoll/error.hpp"
#include "drtoll/experiment.hpp"
#include "drtoll/io.hpp"
#include "drtoll/network.hpp"
#include "drtoll/uncertainty.hpp"

namespace drtoll::cli {

enum ExitCode : int {
  kSuccess = 0,
  kDomainFailure = 1,
  kParseError = 2,
  kSolverFailure = 3,
};

enum class Format { text, json, csv };

inline Format parse_format(const std::string& s) {
  if (s == "text") return Format::text;
  if (s == "json") return Format::json;
  if (s == "csv") return Format::csv;
  throw ParseError("unknown format '" + s + "' (expected text, json or csv)");
}

inline std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string vec_str(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += num(v[i]);
  }
  return s + "]";
}

/// Runs `body`, mapping library errors onto exit codes.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParseError;
  } catch (const NonConvergence& e) {
    err << "solver failure: " << e.what() << " (residual " << e.residual() << ")\n";
    return kSolverFailure;
  } catch (const NumericalDegeneracy& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const Infeasible& e) {
    err << "infeasible: " << e.what() << '\n';
    return kDomainFailure;
  } catch (const OutOfRegime& e) {
    err << "out of regime: " << e.what() << '\n';
    return kDomainFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDomainFailure;
  }
}

/// "a,b,c", "@file.json" (a JSON array) or empty (zeros).
inline Vector parse_vector_arg(const std::string& arg, Eigen::Index size,
                               const std::string& name) {
  if (arg.empty()) return Vector::Zero(size);
  Vector v;
  if (arg.front() == '@') {
    const io::json j = io::parse_json(io::read_text(arg.substr(1)), arg.substr(1));
    v = io::detail::to_vector(j, name);
  } else {
    std::vector<double> vals;
    std::istringstream ss(arg);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(name + ": bad number '" + cell + "'");
      }
    }
    v = Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  }
  if (v.size() != size) {
    throw InvalidInput(name + ": expected " + std::to_string(size) + " values, got " +
                       std::to_string(v.size()));
  }
  return v;
}

inline int cmd_validate(const std::filesystem::path& network_path, Format fmt,
                        std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const io::NetworkSpec spec = io::load_network(network_path);
    const ValidationReport rep = validate_network(spec.network);
    if (fmt == Format::json) {
      io::json issues = io::json::array();
      for (const auto& i : rep.issues) {
        issues.push_back({{"kind", to_string(i.kind)}, {"message", i.message}, {"witness", i.witness}});
      }
      out << io::json{{"valid", rep.passes()}, {"issues", issues}}.dump(2) << '\n';
    } else {
      if (rep.passes()) {
        out << "valid: " << spec.network.num_nodes() << " nodes, "
            << spec.network.num_edges() << " edges, demand " << num(spec.network.demand)
            << '\n';
      } else {
        out << "invalid:\n";
        for (const auto& i : rep.issues) {
          out << "  [" << to_string(i.kind) << "] " << i.message << '\n';
        }
      }
    }
    return rep.passes() ? kSuccess : kDomainFailure;
  });
}

inline int cmd_equilibrium(const std::filesystem::path& network_path,
                           const std::string& alpha_arg, const std::string& tau_arg,
                           const std::string& method, Format fmt, std::ostream& out,
                           std::ostream& err) {
  return guarded(err, [&] {
    if (method != "closed" && method != "potential" && method != "both") {
      throw ParseError("unknown method '" + method + "' (expected closed, potential or both)");
    }
    const io::NetworkSpec spec = io::load_network(network_path);
    const LatencyModel& lat = spec.require_latency();
    const IncidenceData inc = incidence(spec.network);
    const Eigen::Index m = inc.num_edges();
    const Vector alpha = parse_vector_arg(alpha_arg, m, "--alpha");
    const Vector tau = parse_vector_arg(tau_arg, m, "--tau");

    std::optional<NashSolution> closed;
    std::optional<NashSolution> potential;
    if (method != "potential") {
      const KktBlocks b = kkt_blocks(inc, lat);
      try {
        closed = nash_flow_closed_form(b, alpha, tau);
      } catch (const OutOfRegime& e) {
        err << "closed form out of regime (min flow " << num(e.min_flow())
            << "); rerun with --method potential\n";
        if (method == "closed") return static_cast<int>(kDomainFailure);
      }
    }
    if (method != "closed") potential = nash_flow_potential(inc, lat, alpha, tau);

    io::json j = io::json::object();
    auto report = [&](const NashSolution& s) {
      const Vector cost = lat.beta.cwiseProduct(s.flow) + alpha + tau;
      const double L = system_latency(s.flow, lat, alpha);
      if (fmt == Format::json) {
        j[to_string(s.source_method)] = {{"flow", io::to_json(s.flow)},
                                        {"edge_cost", io::to_json(cost)},
                                        {"system_latency", L}};
      } else {
        out << "method: " << to_string(s.source_method) << '\n';
        out << "  edge        flow        cost\n";
        for (Eigen::Index k = 0; k < m; ++k) {
          char buf[128];
          std::snprintf(buf, sizeof buf, "  %-8s %12.6f %12.6f\n",
                        spec.network.edges[static_cast<std::size_t>(k)].id.c_str(),
                        s.flow[k], cost[k]);
          out << buf;
        }
        out << "  system_latency: " << num(L) << '\n';
      }
    };
    if (closed) report(*closed);
    if (potential) report(*potential);
    if (closed && potential) {
      const double d = (closed->flow - potential->flow).cwiseAbs().maxCoeff();
      if (fmt == Format::json) {
        j["max_discrepancy"] = d;
      } else {
        out << "max_discrepancy: " << num(d) << '\n';
      }
    }
    if (fmt == Format::json) out << j.dump(2) << '\n';
    return static_cast<int>(kSuccess);
  });
}

inline int cmd_epsmax(const std::filesystem::path& scenario_path, Format fmt,
                      std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const io::Scenario sc = io::load_scenario(scenario_path);
    const KktBlocks b =
        kkt_blocks(incidence(sc.network.network), sc.network.require_latency());
    const EpsilonMax em = epsilon_max(b, sc.model);
    if (fmt == Format::json) {
      out << io::json{{"eps_max", em.infinite() ? io::json("+inf") : io::json(em.value)},
                      {"certificate_tau", io::to_json(em.certificate)}}
                 .dump(2)
          << '\n';
    } else {
      out << "eps_max: " << num(em.value) << '\n';
      out << "certificate_tau: " << vec_str(em.certificate) << '\n';
    }
    return static_cast<int>(kSuccess);
  });
}

inline int cmd_design(const std::filesystem::path& scenario_path, double eps,
                      std::optional<TollSetLevel> toll_set, Format fmt, std::ostream& out,
                      std::ostream& err) {
  return guarded(err, [&] {
    const io::Scenario sc = io::load_scenario(scenario_path);
    const KktBlocks b =
        kkt_blocks(incidence(sc.network.network), sc.network.require_latency());
    DesignOptions opt;
    opt.toll_set = toll_set.value_or(sc.toll_set);
    const DesignResult r = solve_dro_tolls(b, sc.model, eps, opt);
    if (fmt == Format::text) {
      out << "eps: " << num(r.eps) << " (eps_max " << num(r.eps_max) << ", toll set "
          << to_string(r.toll_set) << ")\n";
      out << "tau_star: " << vec_str(r.tau_star) << '\n';
      out << "objective: " << num(r.objective) << '\n';
      out << "worst_case_expected_latency: " << num(r.worst_case_expected_latency) << '\n';
      out << "solver: " << optim::to_string(r.status) << ", " << r.iterations
          << " iterations, residual " << num(r.residual) << ", gap " << num(r.gap) << '\n';
    } else {
      out << io::design_to_json(r, sc.network.network).dump(2) << '\n';
    }
    return static_cast<int>(kSuccess);
  });
}

inline int cmd_estimate(const std::filesystem::path& samples_path,
                        const std::filesystem::path& network_path, double delta,
                        std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const io::NetworkSpec spec = io::load_network(network_path);
    require_valid(spec.network, "estimate");
    const SampleSet samples = io::load_samples_csv(samples_path, spec.network);
    const DisturbanceModel model =
        estimate_nominal(samples, spec.require_latency(), delta);
    io::json j = io::model_to_json(model);
    j["records"] = samples.size();
    out << j.dump(2) << '\n';
    return static_cast<int>(kSuccess);
  });
}

struct ExperimentArgs {
  std::filesystem::path scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> mc_samples;
  std::optional<TollSetLevel> toll_set;
  Format format = Format::csv;
  unsigned threads = 1;
};

inline int cmd_experiment(const ExperimentArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const io::Scenario sc = io::load_scenario(args.scenario);
    if (sc.grid.empty()) throw ParseError("scenario has no \"grid\"");
    ExperimentConfig cfg;
    cfg.grid = sc.grid;
    cfg.mc_samples = args.mc_samples.value_or(sc.mc_samples);
    cfg.seed = args.seed.value_or(sc.seed);
    cfg.design.toll_set = args.toll_set.value_or(sc.toll_set);
    cfg.threads = args.threads;
    const ExperimentGrid g = run_experiment(sc.network.network, sc.network.require_latency(),
                                            sc.model, cfg);
    switch (args.format) {
      case Format::csv: out << grid_to_csv(g, sc.network.network); break;
      case Format::json: out << grid_to_json(g, sc.network.network).dump(2) << '\n'; break;
      case Format::text: out << grid_to_text(g); break;
    }
    return static_cast<int>(kSuccess);
  });
}

}  // namespace drtoll::cli

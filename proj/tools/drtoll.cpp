#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "drtoll/cli.hpp"

namespace {

struct Globals {
  std::string network;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
};

// Falls back to the global flag when the positional argument is absent.
std::string pick(const std::string& positional, const std::string& global,
                 const char* what) {
  if (!positional.empty()) return positional;
  if (!global.empty()) return global;
  throw drtoll::ParseError(std::string("missing ") + what);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace drtoll;
  namespace dc = drtoll::cli;

  CLI::App app{"Distributionally robust congestion tolls for single-OD networks"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--network", g.network, "network JSON file");
  app.add_option("--scenario", g.scenario, "scenario JSON file");
  app.add_option("--seed", g.seed, "master seed (overrides the scenario)");
  app.add_option("--out", g.out, "write the result to this file instead of stdout");
  app.add_option("--format", g.format, "output format")
      ->check(CLI::IsMember({"csv", "json", "text"}));

  std::string net_pos;
  auto* validate = app.add_subcommand("validate", "check a network file");
  validate->add_option("network", net_pos, "network JSON file");

  std::string alpha, tau, method = "closed";
  auto* equilibrium = app.add_subcommand("equilibrium", "Nash flow for given disturbance and toll");
  equilibrium->add_option("network", net_pos, "network JSON file");
  equilibrium->add_option("--alpha", alpha, "disturbance: a,b,... or @file.json (default 0)");
  equilibrium->add_option("--tau", tau, "toll: a,b,... or @file.json (default 0)");
  equilibrium->add_option("--method", method, "closed, potential or both")
      ->check(CLI::IsMember({"closed", "potential", "both"}));

  std::string sc_pos;
  auto* epsmax = app.add_subcommand("epsmax", "largest admissible mean-shift radius");
  epsmax->add_option("scenario", sc_pos, "scenario JSON file");

  double eps = 0.0;
  std::string toll_set;
  auto* design = app.add_subcommand("design", "distributionally robust toll");
  design->add_option("scenario", sc_pos, "scenario JSON file");
  design->add_option("--eps", eps, "design radius")->required();
  design->add_option("--toll-set", toll_set, "spread_only or anticipated")
      ->check(CLI::IsMember({"spread_only", "anticipated"}));

  std::string samples;
  double delta = 0.0;
  auto* estimate = app.add_subcommand("estimate", "nominal disturbance model from samples");
  estimate->add_option("samples", samples, "samples CSV")->required();
  estimate->add_option("network", net_pos, "network JSON file");
  estimate->add_option("--delta", delta, "support radius")->required();

  std::optional<std::size_t> mc;
  unsigned threads = 1;
  auto* experiment = app.add_subcommand("experiment", "Monte Carlo latency grid");
  experiment->add_option("scenario", sc_pos, "scenario JSON file");
  experiment->add_option("--mc-samples", mc, "samples per cell (overrides the scenario)");
  experiment->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  experiment->add_option("--toll-set", toll_set, "spread_only or anticipated")
      ->check(CLI::IsMember({"spread_only", "anticipated"}));

  // Global flags may follow the subcommand.
  for (auto* sub : {validate, equilibrium, epsmax, design, estimate, experiment}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dc::kParseError;
  }

  std::ostringstream buffer;
  std::ostream& out = g.out.empty() ? std::cout : buffer;
  std::ostream& err = std::cerr;

  const int rc = dc::guarded(err, [&]() -> int {
    auto fmt = [&](dc::Format fallback) {
      return g.format.empty() ? fallback : dc::parse_format(g.format);
    };
    std::optional<TollSetLevel> level;
    if (!toll_set.empty()) level = parse_toll_set_level(toll_set);

    if (*validate) {
      return dc::cmd_validate(pick(net_pos, g.network, "network"), fmt(dc::Format::text), out, err);
    }
    if (*equilibrium) {
      return dc::cmd_equilibrium(pick(net_pos, g.network, "network"), alpha, tau, method,
                                 fmt(dc::Format::text), out, err);
    }
    if (*epsmax) {
      return dc::cmd_epsmax(pick(sc_pos, g.scenario, "scenario"), fmt(dc::Format::text), out, err);
    }
    if (*design) {
      return dc::cmd_design(pick(sc_pos, g.scenario, "scenario"), eps, level,
                            fmt(dc::Format::json), out, err);
    }
    if (*estimate) {
      return dc::cmd_estimate(samples, pick(net_pos, g.network, "network"), delta, out, err);
    }
    dc::ExperimentArgs args;
    args.scenario = pick(sc_pos, g.scenario, "scenario");
    args.seed = g.seed;
    args.mc_samples = mc;
    args.toll_set = level;
    args.format = fmt(dc::Format::csv);
    args.threads = threads;
    return dc::cmd_experiment(args, out, err);
  });

  if (!g.out.empty() && rc == dc::kSuccess) {
    std::ofstream f(g.out, std::ios::binary);
    f << buffer.str();
    if (!f) {
      err << "error: cannot write " << g.out << '\n';
      return dc::kDomainFailure;
    }
  }
  return rc;
}

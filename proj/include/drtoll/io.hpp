#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "drtoll/design.hpp"
#include "drtoll/equilibrium.hpp"
#include "drtoll/error.hpp"
#include "drtoll/network.hpp"
#include "drtoll/types.hpp"
#include "drtoll/uncertainty.hpp"

namespace drtoll::io {

using json = nlohmann::json;

/// A network file: topology plus (optionally) per-edge latency slopes.
struct NetworkSpec {
  Network network;
  std::optional<LatencyModel> latency;

  const LatencyModel& require_latency() const {
    if (!latency) throw ParseError("network file has no \"beta\" on its edges");
    return *latency;
  }
};

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

namespace detail {

inline std::string id_string(const json& j, const std::string& what) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ParseError(what + " must be a string or integer id");
}

inline Vector to_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(what + " must contain only numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Matrix to_matrix(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = to_vector(j[static_cast<std::size_t>(r)], what);
    if (row.size() != rows) throw ParseError(what + " must be square");
    m.row(r) = row.transpose();
  }
  return m;
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw ParseError(what + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(what + ": bad \"" + key + "\": " + e.what());
  }
}

}  // namespace detail

/// Parses {"nodes", "edges": [{"id","from","to","beta"}], "source",
/// "destination", "demand"}. Structural validity is not checked here.
inline NetworkSpec network_from_json(const json& j, const std::string& what = "network") {
  if (!j.is_object()) throw ParseError(what + ": top level must be an object");
  if (!j.contains("nodes") || !j["nodes"].is_array()) {
    throw ParseError(what + ": \"nodes\" must be an array");
  }
  if (!j.contains("edges") || !j["edges"].is_array()) {
    throw ParseError(what + ": \"edges\" must be an array");
  }
  NetworkSpec spec;
  Network& net = spec.network;
  std::map<std::string, Eigen::Index> index;
  for (const auto& n : j["nodes"]) {
    const std::string id = detail::id_string(n, what + ": node");
    if (index.count(id)) throw ParseError(what + ": duplicate node id " + id);
    index[id] = net.num_nodes();
    net.node_ids.push_back(id);
  }
  auto node = [&](const json& v, const std::string& ctx) -> Eigen::Index {
    const std::string id = detail::id_string(v, ctx);
    const auto it = index.find(id);
    if (it == index.end()) throw ParseError(ctx + ": unknown node " + id);
    return it->second;
  };
  std::vector<double> beta;
  std::size_t with_beta = 0;
  std::map<std::string, int> edge_ids;
  for (const auto& e : j["edges"]) {
    if (!e.is_object()) throw ParseError(what + ": edges must be objects");
    Edge edge;
    edge.id = detail::id_string(e.contains("id") ? e["id"] : json(), what + ": edge id");
    if (edge_ids[edge.id]++) throw ParseError(what + ": duplicate edge id " + edge.id);
    edge.tail = node(e.contains("from") ? e["from"] : json(), what + ": edge " + edge.id + " from");
    edge.head = node(e.contains("to") ? e["to"] : json(), what + ": edge " + edge.id + " to");
    net.edges.push_back(edge);
    if (e.contains("beta")) {
      if (!e["beta"].is_number()) throw ParseError(what + ": beta must be a number");
      beta.push_back(e["beta"].get<double>());
      ++with_beta;
    }
  }
  net.source = node(j.contains("source") ? j["source"] : json(), what + ": source");
  net.destination =
      node(j.contains("destination") ? j["destination"] : json(), what + ": destination");
  if (!j.contains("demand") || !j["demand"].is_number()) {
    throw ParseError(what + ": \"demand\" must be a number");
  }
  net.demand = j["demand"].get<double>();
  if (with_beta == net.edges.size() && with_beta > 0) {
    spec.latency = LatencyModel{Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(beta.size()))};
  } else if (with_beta != 0) {
    throw ParseError(what + ": either every edge or no edge must carry \"beta\"");
  }
  return spec;
}

inline NetworkSpec load_network(const std::filesystem::path& path) {
  return network_from_json(parse_json(read_text(path), path.string()), path.string());
}

/// CSV with a header row: f_<edge> columns then l_<edge> columns, in network
/// edge order.
inline SampleSet parse_samples_csv(const std::string& text, const Network& net,
                                   const std::string& what = "samples") {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return out;
  };
  if (!std::getline(in, line)) throw ParseError(what + ": empty file");
  const auto header = split(line);
  const auto m = static_cast<std::size_t>(net.num_edges());
  if (header.size() != 2 * m) {
    throw ParseError(what + ": expected " + std::to_string(2 * m) + " columns, got " +
                     std::to_string(header.size()));
  }
  for (std::size_t k = 0; k < m; ++k) {
    if (header[k] != "f_" + net.edges[k].id || header[m + k] != "l_" + net.edges[k].id) {
      throw ParseError(what + ": header must list f_<edge> then l_<edge> in network "
                              "edge order (mismatch at edge " + net.edges[k].id + ")");
    }
  }
  SampleSet set;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != 2 * m) {
      throw ParseError(what + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(cells.size()) + " fields");
    }
    Vector f(static_cast<Eigen::Index>(m));
    Vector l(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < 2 * m; ++k) {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(cells[k], &used);
        if (used != cells[k].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError(what + ": line " + std::to_string(lineno) + ": bad number '" +
                         cells[k] + "'");
      }
      (k < m ? f[static_cast<Eigen::Index>(k)] : l[static_cast<Eigen::Index>(k - m)]) = v;
    }
    set.flows.push_back(f);
    set.latencies.push_back(l);
  }
  return set;
}

inline SampleSet load_samples_csv(const std::filesystem::path& path, const Network& net) {
  return parse_samples_csv(read_text(path), net, path.string());
}

/// Everything the pipeline commands need, resolved from a scenario file.
struct Scenario {
  std::filesystem::path network_path;
  NetworkSpec network;
  DisturbanceModel model;
  std::vector<double> grid;
  std::size_t mc_samples = 10000;
  std::uint64_t seed = 0;
  TollSetLevel toll_set = TollSetLevel::spread_only;
};

/// Parses a scenario; relative paths resolve against `base_dir`.
inline Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir,
                                   const std::string& what = "scenario") {
  if (!j.is_object()) throw ParseError(what + ": top level must be an object");
  Scenario sc;
  const auto net_rel = detail::get_field<std::string>(j, "network", what);
  sc.network_path = base_dir / net_rel;
  sc.network = load_network(sc.network_path);
  const LatencyModel& lat = sc.network.require_latency();
  const Eigen::Index m = sc.network.network.num_edges();

  if (!j.contains("disturbance") || !j["disturbance"].is_object()) {
    throw ParseError(what + ": \"disturbance\" must be an object");
  }
  const json& d = j["disturbance"];
  const double delta = detail::get_field<double>(d, "delta", what + ".disturbance");
  if (!(delta >= 0.0)) throw InvalidInput(what + ": delta must be >= 0");
  if (d.contains("samples")) {
    const auto path = base_dir / detail::get_field<std::string>(d, "samples", what);
    require_valid(sc.network.network, "scenario");
    sc.model = estimate_nominal(load_samples_csv(path, sc.network.network), lat, delta);
  } else {
    sc.model.mean = detail::to_vector(d.contains("mean") ? d["mean"] : json(), what + ".mean");
    sc.model.cov = d.contains("cov") ? detail::to_matrix(d["cov"], what + ".cov")
                                     : Matrix::Zero(m, m);
    sc.model.support_radius = delta;
    if (sc.model.mean.size() != m || sc.model.cov.rows() != m) {
      throw ParseError(what + ": mean/cov must have one entry per edge (" +
                       std::to_string(m) + ")");
    }
  }
  if (j.contains("grid")) {
    const Vector g = detail::to_vector(j["grid"], what + ".grid");
    sc.grid.assign(g.data(), g.data() + g.size());
    for (const double v : sc.grid) {
      if (!(v >= 0.0)) throw InvalidInput(what + ": grid values must be >= 0");
    }
  }
  if (j.contains("mc_samples")) {
    const auto n = detail::get_field<long long>(j, "mc_samples", what);
    if (n < 1) throw InvalidInput(what + ": mc_samples must be >= 1");
    sc.mc_samples = static_cast<std::size_t>(n);
  }
  if (j.contains("seed")) sc.seed = detail::get_field<std::uint64_t>(j, "seed", what);
  if (j.contains("toll_set")) {
    sc.toll_set = parse_toll_set_level(detail::get_field<std::string>(j, "toll_set", what));
  }
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(parse_json(read_text(path), path.string()),
                            path.parent_path(), path.string());
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

inline json model_to_json(const DisturbanceModel& model) {
  return {{"mean", to_json(model.mean)},
          {"cov", to_json(model.cov)},
          {"delta", model.support_radius}};
}

inline json design_to_json(const DesignResult& r, const Network& net) {
  json tau = json::object();
  for (Eigen::Index k = 0; k < r.tau_star.size(); ++k) {
    tau[net.edges[static_cast<std::size_t>(k)].id] = r.tau_star[k];
  }
  return {{"eps", r.eps},
          {"eps_max", std::isinf(r.eps_max) ? json("+inf") : json(r.eps_max)},
          {"toll_set", to_string(r.toll_set)},
          {"tau_star", to_json(r.tau_star)},
          {"tau_by_edge", tau},
          {"objective", r.objective},
          {"worst_case_expected_latency", r.worst_case_expected_latency},
          {"canonicalized", r.canonicalized},
          {"solver",
           {{"status", optim::to_string(r.status)},
            {"iterations", r.iterations},
            {"polish_iterations", r.polish_iterations},
            {"residual", r.residual},
            {"gap", r.gap}}}};
}

}  // namespace drtoll::io

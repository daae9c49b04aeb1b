#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/QR>

#include "drtoll/error.hpp"
#include "drtoll/types.hpp"

namespace drtoll {

struct Edge {
  std::string id;
  Eigen::Index tail = 0;
  Eigen::Index head = 0;
};

/// Single-origin/single-destination directed network with fixed demand.
/// Node and edge order is the order of construction (file order).
struct Network {
  std::vector<std::string> node_ids;
  std::vector<Edge> edges;
  Eigen::Index source = 0;
  Eigen::Index destination = 0;
  double demand = 0.0;

  Eigen::Index num_nodes() const { return static_cast<Eigen::Index>(node_ids.size()); }
  Eigen::Index num_edges() const { return static_cast<Eigen::Index>(edges.size()); }
};

/// Builds a network from 1-based (tail, head) pairs. Nodes are named "1".."n",
/// edges "e1".."em"; the source is node 1 and the destination node n.
inline Network make_network(int num_nodes,
                            const std::vector<std::pair<int, int>>& edges,
                            double demand) {
  Network net;
  for (int i = 1; i <= num_nodes; ++i) net.node_ids.push_back(std::to_string(i));
  int k = 1;
  for (const auto& [t, h] : edges) {
    net.edges.push_back({"e" + std::to_string(k++), t - 1, h - 1});
  }
  net.source = 0;
  net.destination = num_nodes > 0 ? num_nodes - 1 : 0;
  net.demand = demand;
  return net;
}

enum class IssueKind {
  degenerate_graph,
  bad_endpoint,
  bad_demand,
  source_count,
  sink_count,
  cycle,
  dead_edge,
};

inline const char* to_string(IssueKind k) {
  switch (k) {
    case IssueKind::degenerate_graph: return "degenerate_graph";
    case IssueKind::bad_endpoint: return "bad_endpoint";
    case IssueKind::bad_demand: return "bad_demand";
    case IssueKind::source_count: return "source_count";
    case IssueKind::sink_count: return "sink_count";
    case IssueKind::cycle: return "cycle";
    case IssueKind::dead_edge: return "dead_edge";
  }
  return "unknown";
}

struct ValidationIssue {
  IssueKind kind;
  std::string message;
  /// Edge ids involved (cycle edges, dead edges, offending edge).
  std::vector<std::string> witness;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool passes() const { return issues.empty(); }
  bool has(IssueKind k) const {
    for (const auto& i : issues) {
      if (i.kind == k) return true;
    }
    return false;
  }
  const ValidationIssue* find(IssueKind k) const {
    for (const auto& i : issues) {
      if (i.kind == k) return &i;
    }
    return nullptr;
  }
};

namespace detail {

inline std::vector<bool> reachable(const Network& net, Eigen::Index from,
                                   bool forward) {
  std::vector<bool> seen(static_cast<std::size_t>(net.num_nodes()), false);
  std::vector<Eigen::Index> stack{from};
  seen[static_cast<std::size_t>(from)] = true;
  while (!stack.empty()) {
    const Eigen::Index u = stack.back();
    stack.pop_back();
    for (const Edge& e : net.edges) {
      const Eigen::Index a = forward ? e.tail : e.head;
      const Eigen::Index b = forward ? e.head : e.tail;
      if (a == u && !seen[static_cast<std::size_t>(b)]) {
        seen[static_cast<std::size_t>(b)] = true;
        stack.push_back(b);
      }
    }
  }
  return seen;
}

// Returns the edge indices of one directed cycle, or empty if acyclic.
inline std::vector<Eigen::Index> find_cycle(const Network& net) {
  const auto n = static_cast<std::size_t>(net.num_nodes());
  std::vector<int> color(n, 0);  // 0 white, 1 on stack, 2 done
  std::vector<Eigen::Index> via(n, -1);
  std::vector<Eigen::Index> cycle;

  std::function<bool(Eigen::Index)> dfs = [&](Eigen::Index u) {
    color[static_cast<std::size_t>(u)] = 1;
    for (Eigen::Index k = 0; k < net.num_edges(); ++k) {
      const Edge& e = net.edges[static_cast<std::size_t>(k)];
      if (e.tail != u) continue;
      const auto v = static_cast<std::size_t>(e.head);
      if (color[v] == 1) {
        cycle.push_back(k);
        for (Eigen::Index w = u; w != e.head;) {
          const Eigen::Index ek = via[static_cast<std::size_t>(w)];
          cycle.push_back(ek);
          w = net.edges[static_cast<std::size_t>(ek)].tail;
        }
        std::reverse(cycle.begin(), cycle.end());
        return true;
      }
      if (color[v] == 0) {
        via[v] = k;
        if (dfs(e.head)) return true;
      }
    }
    color[static_cast<std::size_t>(u)] = 2;
    return false;
  };
  for (Eigen::Index u = 0; u < net.num_nodes(); ++u) {
    if (color[static_cast<std::size_t>(u)] == 0 && dfs(u)) break;
  }
  return cycle;
}

}  // namespace detail

/// Reports every violated structural requirement; never throws.
inline ValidationReport validate_network(const Network& net) {
  ValidationReport rep;
  auto add = [&](IssueKind k, std::string msg, std::vector<std::string> w = {}) {
    rep.issues.push_back({k, std::move(msg), std::move(w)});
  };
  const Eigen::Index n = net.num_nodes();

  if (!(std::isfinite(net.demand) && net.demand > 0.0)) {
    std::ostringstream os;
    os << "demand must be positive and finite (got " << net.demand << ")";
    add(IssueKind::bad_demand, os.str());
  }
  if (n < 2 || net.source == net.destination || net.source < 0 ||
      net.destination < 0 || net.source >= n || net.destination >= n) {
    add(IssueKind::degenerate_graph,
        "network needs distinct source and destination nodes");
    return rep;
  }
  bool endpoints_ok = true;
  for (const Edge& e : net.edges) {
    if (e.tail < 0 || e.tail >= n || e.head < 0 || e.head >= n) {
      add(IssueKind::bad_endpoint, "edge " + e.id + " references an unknown node",
          {e.id});
      endpoints_ok = false;
    }
  }
  if (!endpoints_ok) return rep;

  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  std::vector<int> outdeg(static_cast<std::size_t>(n), 0);
  for (const Edge& e : net.edges) {
    ++outdeg[static_cast<std::size_t>(e.tail)];
    ++indeg[static_cast<std::size_t>(e.head)];
  }
  std::vector<std::string> no_in;
  std::vector<std::string> no_out;
  for (Eigen::Index v = 0; v < n; ++v) {
    if (indeg[static_cast<std::size_t>(v)] == 0) no_in.push_back(net.node_ids[static_cast<std::size_t>(v)]);
    if (outdeg[static_cast<std::size_t>(v)] == 0) no_out.push_back(net.node_ids[static_cast<std::size_t>(v)]);
  }
  const std::string& s_id = net.node_ids[static_cast<std::size_t>(net.source)];
  const std::string& d_id = net.node_ids[static_cast<std::size_t>(net.destination)];
  if (!(no_in.size() == 1 && no_in.front() == s_id)) {
    std::ostringstream os;
    os << "exactly one node (the source " << s_id
       << ") must have no incoming edges; found " << no_in.size();
    for (std::size_t i = 0; i < no_in.size(); ++i) os << (i ? ", " : ": ") << no_in[i];
    add(IssueKind::source_count, os.str());
  }
  if (!(no_out.size() == 1 && no_out.front() == d_id)) {
    std::ostringstream os;
    os << "exactly one node (the destination " << d_id
       << ") must have no outgoing edges; found " << no_out.size();
    for (std::size_t i = 0; i < no_out.size(); ++i) os << (i ? ", " : ": ") << no_out[i];
    add(IssueKind::sink_count, os.str());
  }

  const auto cyc = detail::find_cycle(net);
  if (!cyc.empty()) {
    std::vector<std::string> w;
    std::ostringstream os;
    os << "cycle found:";
    for (const Eigen::Index k : cyc) {
      const Edge& e = net.edges[static_cast<std::size_t>(k)];
      w.push_back(e.id);
      os << ' ' << e.id << '(' << net.node_ids[static_cast<std::size_t>(e.tail)]
         << "->" << net.node_ids[static_cast<std::size_t>(e.head)] << ')';
    }
    add(IssueKind::cycle, os.str(), std::move(w));
  }

  const auto from_s = detail::reachable(net, net.source, true);
  const auto to_d = detail::reachable(net, net.destination, false);
  std::vector<std::string> dead;
  for (const Edge& e : net.edges) {
    if (!from_s[static_cast<std::size_t>(e.tail)] ||
        !to_d[static_cast<std::size_t>(e.head)]) {
      dead.push_back(e.id);
    }
  }
  if (!dead.empty()) {
    std::string msg = "edges on no source->destination path:";
    for (const auto& id : dead) msg += " " + id;
    add(IssueKind::dead_edge, msg, std::move(dead));
  }
  if (net.edges.empty()) {
    add(IssueKind::degenerate_graph, "network has no edges");
  }
  return rep;
}

inline void require_valid(const Network& net, const char* who) {
  const ValidationReport rep = validate_network(net);
  if (!rep.passes()) {
    std::string msg = std::string(who) + ": invalid network: " + rep.issues.front().message;
    throw InvalidInput(msg);
  }
}

/// Node-edge incidence restricted to V \ {d} and the source injection.
struct IncidenceData {
  Matrix R;
  Vector eta;

  Eigen::Index num_edges() const { return R.cols(); }
  double demand() const { return eta.size() ? eta.cwiseAbs().maxCoeff() : 0.0; }
};

inline IncidenceData incidence(const Network& net) {
  require_valid(net, "incidence");
  const Eigen::Index n = net.num_nodes();
  const Eigen::Index m = net.num_edges();
  std::vector<Eigen::Index> row(static_cast<std::size_t>(n), -1);
  Eigen::Index r = 0;
  for (Eigen::Index v = 0; v < n; ++v) {
    if (v != net.destination) row[static_cast<std::size_t>(v)] = r++;
  }
  IncidenceData inc{Matrix::Zero(n - 1, m), Vector::Zero(n - 1)};
  for (Eigen::Index k = 0; k < m; ++k) {
    const Edge& e = net.edges[static_cast<std::size_t>(k)];
    if (const auto rt = row[static_cast<std::size_t>(e.tail)]; rt >= 0) inc.R(rt, k) += 1.0;
    if (const auto rh = row[static_cast<std::size_t>(e.head)]; rh >= 0) inc.R(rh, k) -= 1.0;
  }
  inc.eta[row[static_cast<std::size_t>(net.source)]] = net.demand;
  return inc;
}

inline Eigen::Index incidence_rank(const IncidenceData& inc) {
  Eigen::ColPivHouseholderQR<Matrix> qr(inc.R);
  qr.setThreshold(1e-10);
  return qr.rank();
}

struct PathSet {
  /// Edge indices of each source->destination path.
  std::vector<std::vector<Eigen::Index>> paths;
};

inline PathSet enumerate_paths(const Network& net, std::size_t max_paths = 10000) {
  require_valid(net, "enumerate_paths");
  PathSet out;
  std::vector<Eigen::Index> current;
  std::function<void(Eigen::Index)> dfs = [&](Eigen::Index u) {
    if (u == net.destination) {
      if (out.paths.size() >= max_paths) {
        throw TooManyPaths("enumerate_paths: more than " +
                               std::to_string(max_paths) + " paths",
                           max_paths);
      }
      out.paths.push_back(current);
      return;
    }
    for (Eigen::Index k = 0; k < net.num_edges(); ++k) {
      const Edge& e = net.edges[static_cast<std::size_t>(k)];
      if (e.tail != u) continue;
      current.push_back(k);
      dfs(e.head);
      current.pop_back();
    }
  };
  dfs(net.source);
  return out;
}

/// f >= -tol componentwise and ||R f - eta||_inf <= tol.
inline bool is_feasible_flow(const IncidenceData& inc, const Vector& f,
                             double tol) {
  if (f.size() != inc.num_edges()) {
    throw InvalidInput("is_feasible_flow: flow has wrong dimension");
  }
  if (f.size() && f.minCoeff() < -tol) return false;
  const Vector r = inc.R * f - inc.eta;
  return r.size() == 0 || r.cwiseAbs().maxCoeff() <= tol;
}

}  // namespace drtoll

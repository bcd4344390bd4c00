#pragma once

#include <algorithm>
#include <cstddef>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "damprd/errors.hpp"

namespace damprd::grid {

enum class BusKind { slack, pv, pq };

inline std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::slack: return "slack";
    case BusKind::pv: return "PV";
    case BusKind::pq: return "PQ";
  }
  return "?";
}

struct Bus {
  int id = 0;
  BusKind kind = BusKind::pq;
  double base_kv = 0.0;
  double v_set = 1.0;  // p.u., used by slack and PV buses

  bool operator==(const Bus&) const = default;
};

/// Nominal pi-model line; r, x, b in p.u. on the system base.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;
  bool in_service = true;

  bool operator==(const Branch&) const = default;
};

/// Classical machine: constant EMF behind x_d', speed damping D.
/// H in seconds and D in p.u. torque / p.u. speed, both on the system base.
struct Generator {
  std::string id;
  int bus = 0;
  double h = 0.0;
  double d = 0.0;
  double xd_prime = 0.0;
  double p_max = 0.0;
  double p_min = 0.0;
  std::string station;
  bool dispatchable = true;
  double p_set = 0.0;

  /// Area label: station id up to the first '-', or the whole station id.
  std::string area() const {
    auto dash = station.find('-');
    return dash == std::string::npos ? station : station.substr(0, dash);
  }

  double capacity() const { return p_max; }

  bool operator==(const Generator&) const = default;
};

struct Load {
  std::string id;
  int bus = 0;
  double p = 0.0;
  double q = 0.0;

  bool operator==(const Load&) const = default;
};

struct NetworkCase {
  double base_mva = 100.0;
  double frequency = 60.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Load> loads;

  bool operator==(const NetworkCase&) const = default;

  std::size_t bus_count() const { return buses.size(); }
  std::size_t generator_count() const { return generators.size(); }

  /// Position of bus `id` in `buses`.
  std::size_t bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == id) return i;
    throw PreconditionError("unknown bus id " + std::to_string(id));
  }

  std::size_t generator_index(std::string_view id) const {
    for (std::size_t i = 0; i < generators.size(); ++i)
      if (generators[i].id == id) return i;
    throw PreconditionError("unknown generator id " + std::string(id));
  }

  std::size_t load_index(std::string_view id) const {
    for (std::size_t i = 0; i < loads.size(); ++i)
      if (loads[i].id == id) return i;
    throw PreconditionError("unknown load id " + std::string(id));
  }

  std::size_t slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].kind == BusKind::slack) return i;
    throw PreconditionError("case has no slack bus");
  }

  /// True when the generator sits on the slack bus and therefore follows the
  /// power balance instead of its setpoint.
  bool on_slack_bus(std::size_t gen) const {
    return buses[bus_index(generators[gen].bus)].kind == BusKind::slack;
  }

  /// Bus position of each generator, in generator order.
  std::vector<std::size_t> generator_buses() const {
    std::vector<std::size_t> out;
    out.reserve(generators.size());
    for (const auto& g : generators) out.push_back(bus_index(g.bus));
    return out;
  }

  std::vector<std::size_t> load_buses() const {
    std::vector<std::size_t> out;
    out.reserve(loads.size());
    for (const auto& l : loads) out.push_back(bus_index(l.bus));
    return out;
  }

  std::vector<double> base_dispatch() const {
    std::vector<double> out;
    out.reserve(generators.size());
    for (const auto& g : generators) out.push_back(g.p_set);
    return out;
  }
};

/// Per-load absolute P and Q demand (p.u.).
struct LoadLevels {
  std::vector<double> p;
  std::vector<double> q;

  static LoadLevels base(const NetworkCase& c) {
    LoadLevels out;
    for (const auto& l : c.loads) {
      out.p.push_back(l.p);
      out.q.push_back(l.q);
    }
    return out;
  }

  LoadLevels scaled(double factor) const {
    LoadLevels out = *this;
    for (auto& v : out.p) v *= factor;
    for (auto& v : out.q) v *= factor;
    return out;
  }
};

/// True when every bus is reachable from the first one over in-service branches.
inline bool is_connected(const NetworkCase& c) {
  const std::size_t n = c.buses.size();
  if (n == 0) return false;
  std::unordered_map<int, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) pos[c.buses[i].id] = i;
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& br : c.branches) {
    if (!br.in_service) continue;
    auto f = pos.find(br.from);
    auto t = pos.find(br.to);
    if (f == pos.end() || t == pos.end()) continue;
    adj[f->second].push_back(t->second);
    adj[t->second].push_back(f->second);
  }
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> todo;
  todo.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!todo.empty()) {
    auto u = todo.front();
    todo.pop();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        todo.push(v);
      }
    }
  }
  return count == n;
}

/// Checks the structural invariants of a case.  Throws PreconditionError for
/// bad records and TopologyError for an islanded network.
inline void validate(const NetworkCase& c) {
  if (c.base_mva <= 0.0) throw PreconditionError("base MVA must be positive");
  if (c.frequency <= 0.0) throw PreconditionError("nominal frequency must be positive");
  if (c.buses.empty()) throw PreconditionError("case has no buses");

  std::unordered_map<int, int> seen;
  int slacks = 0;
  for (const auto& b : c.buses) {
    if (++seen[b.id] > 1) throw PreconditionError("duplicate bus id " + std::to_string(b.id));
    if (b.kind == BusKind::slack) ++slacks;
    if (b.v_set <= 0.0) throw PreconditionError("bus " + std::to_string(b.id) + ": v_set must be positive");
  }
  if (slacks != 1)
    throw PreconditionError("case must have exactly one slack bus, found " + std::to_string(slacks));

  auto known = [&](int id) { return seen.count(id) > 0; };
  for (const auto& br : c.branches) {
    if (!known(br.from) || !known(br.to))
      throw PreconditionError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                              " references an unknown bus");
    if (br.from == br.to) throw PreconditionError("branch connects bus " + std::to_string(br.from) + " to itself");
    if (br.r == 0.0 && br.x == 0.0)
      throw PreconditionError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                              " has zero impedance");
  }

  std::unordered_map<std::string, int> gen_ids;
  for (const auto& g : c.generators) {
    if (++gen_ids[g.id] > 1) throw PreconditionError("duplicate generator id " + g.id);
    if (!known(g.bus)) throw PreconditionError("generator " + g.id + " references unknown bus " + std::to_string(g.bus));
    if (!(g.h > 0.0)) throw PreconditionError("generator " + g.id + ": H must be positive");
    if (!(g.xd_prime > 0.0)) throw PreconditionError("generator " + g.id + ": x_d' must be positive");
    if (g.d < 0.0) throw PreconditionError("generator " + g.id + ": D must be non-negative");
    if (!(g.p_max > g.p_min) || g.p_min < 0.0)
      throw PreconditionError("generator " + g.id + ": requires P_max > P_min >= 0");
    if (g.station.empty()) throw PreconditionError("generator " + g.id + ": empty station id");
  }

  std::unordered_map<std::string, int> load_ids;
  for (const auto& l : c.loads) {
    if (++load_ids[l.id] > 1) throw PreconditionError("duplicate load id " + l.id);
    if (!known(l.bus)) throw PreconditionError("load " + l.id + " references unknown bus " + std::to_string(l.bus));
  }

  if (!is_connected(c)) throw TopologyError("in-service branch graph is not connected");
}

}  // namespace damprd::grid

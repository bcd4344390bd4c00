#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "damprd/errors.hpp"
#include "damprd/estimator/naer.hpp"
#include "damprd/estimator/window.hpp"
#include "damprd/grid/network_case.hpp"
#include "damprd/grid/power_flow.hpp"
#include "damprd/io/case_file.hpp"
#include "damprd/loop/closed_loop.hpp"
#include "damprd/redispatch/bounds.hpp"
#include "damprd/redispatch/lp.hpp"
#include "damprd/small_signal/modes.hpp"

namespace damprd::io {

inline std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

namespace detail {

/// Comma-separated rows with a header.  Whitespace around fields is dropped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;
};

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    const auto a = cur.find_first_not_of(" \t\r");
    const auto b = cur.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : cur.substr(a, b - a + 1));
  }
  return out;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open " + path);
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') continue;
    auto fields = split_csv(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError(located(path, lineno, 0, "expected " + std::to_string(t.header.size()) + " fields"), lineno);
    t.rows.push_back(std::move(fields));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) throw ParseError(located(path, lineno, 0, "missing header row"), lineno);
  return t;
}

inline double csv_number(const std::string& path, int line, const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(located(path, line, 0, "expected a number, got '" + s + "'"), line);
  return v;
}

inline void expect_header(const CsvTable& t, const std::string& path, const std::vector<std::string>& want) {
  if (t.header != want) {
    std::string h;
    for (std::size_t i = 0; i < want.size(); ++i) h += (i ? "," : "") + want[i];
    throw ParseError(located(path, 1, 0, "header must be " + h), 1);
  }
}

}  // namespace detail

// ---- power flow and modes ----

inline void write_power_flow(std::ostream& os, const grid::NetworkCase& c, const grid::OperatingPoint& op) {
  os << "bus,kind,v_pu,theta_rad,p_pu,q_pu\n";
  for (std::size_t b = 0; b < c.buses.size(); ++b) {
    const auto i = static_cast<Eigen::Index>(b);
    os << c.buses[b].id << ',' << grid::to_string(c.buses[b].kind) << ',' << fmt(op.v[i]) << ','
       << fmt(op.theta[i]) << ',' << fmt(op.p[i]) << ',' << fmt(op.q[i]) << '\n';
  }
  os << "\ngenerator,p_pu,q_pu\n";
  for (std::size_t g = 0; g < c.generators.size(); ++g)
    os << c.generators[g].id << ',' << fmt(op.gen_p[g]) << ',' << fmt(op.gen_q[g]) << '\n';
  os << "\niterations," << op.iterations << "\nmismatch," << fmt(op.mismatch, "%.3e") << "\nlosses,"
     << fmt(grid::losses(op)) << '\n';
}

inline void write_modes(std::ostream& os, const grid::NetworkCase& c, const std::vector<small_signal::Mode>& modes) {
  os << "sigma,omega,zeta,freq_hz,class";
  for (const auto& g : c.generators) os << ",shape_" << g.id << "_mag,shape_" << g.id << "_deg";
  os << '\n';
  for (const auto& m : modes) {
    os << fmt(m.eigenvalue.real()) << ',' << fmt(m.eigenvalue.imag()) << ',' << fmt(m.damping) << ','
       << fmt(m.frequency) << ',' << small_signal::to_string(m.kind);
    for (Eigen::Index i = 0; i < m.shape.size(); ++i) {
      const double mag = std::abs(m.shape[i]);
      double deg = std::arg(m.shape[i]) * 180.0 / std::numbers::pi;
      if (mag < 1e-12 || std::abs(deg) < 1e-9) deg = 0.0;
      os << ',' << fmt(mag, "%.6f") << ',' << fmt(deg, "%.3f");
    }
    os << '\n';
  }
}

// ---- sensitivity estimates ----

inline void write_estimate_csv(std::ostream& os, const estimator::SensitivityEstimate& e) {
  os << "feature_id,psi_hat,ensemble_std\n";
  for (std::size_t j = 0; j < e.feature_ids.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    os << e.feature_ids[j] << ',' << fmt(e.psi[i], "%.12e") << ','
       << fmt(e.spread.size() > i ? e.spread[i] : 0.0, "%.12e") << '\n';
  }
}

inline nlohmann::ordered_json estimate_json(const estimator::SensitivityEstimate& e) {
  nlohmann::ordered_json j;
  j["samples"] = e.samples;
  j["condition"] = e.condition;
  j["seed"] = e.seed;
  j["replicates"] = e.replicates;
  j["flagged"] = e.flagged;
  j["features"] = e.feature_ids;
  j["psi"] = std::vector<double>(e.psi.data(), e.psi.data() + e.psi.size());
  return j;
}

/// Rows `t,dzeta,<feature ids...>` into a regression window.
inline estimator::SampleWindow read_samples_csv(const std::string& path) {
  const auto t = detail::read_csv(path);
  if (t.header.size() < 3 || t.header[0] != "t" || t.header[1] != "dzeta")
    throw ParseError(detail::located(path, 1, 0, "header must be t,dzeta,<feature ids>"), 1);
  estimator::SampleWindow w(std::vector<std::string>(t.header.begin() + 2, t.header.end()));
  std::vector<double> dx(t.header.size() - 2);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    for (std::size_t j = 0; j < dx.size(); ++j) dx[j] = detail::csv_number(path, t.lines[r], row[j + 2]);
    try {
      w.push(dx, detail::csv_number(path, t.lines[r], row[1]), detail::csv_number(path, t.lines[r], row[0]));
    } catch (const OrderingError& e) {
      throw ParseError(detail::located(path, t.lines[r], 1, e.what()), t.lines[r], 1);
    }
  }
  return w;
}

inline void write_samples_csv(std::ostream& os, const estimator::SampleWindow& w) {
  os << "t,dzeta";
  for (const auto& id : w.feature_ids()) os << ',' << id;
  os << '\n';
  const Eigen::MatrixXd x = w.design();
  const Eigen::VectorXd z = w.response();
  const auto ts = w.timestamps();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    os << fmt(ts[static_cast<std::size_t>(i)], "%.3f") << ',' << fmt(z[i], "%.17g");
    for (Eigen::Index j = 0; j < x.cols(); ++j) os << ',' << fmt(x(i, j), "%.17g");
    os << '\n';
  }
}

/// Reads `feature_id,psi_hat,ensemble_std`.
inline std::pair<std::vector<std::string>, std::vector<double>> read_estimate_csv(const std::string& path) {
  const auto t = detail::read_csv(path);
  detail::expect_header(t, path, {"feature_id", "psi_hat", "ensemble_std"});
  std::vector<std::string> ids;
  std::vector<double> psi;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ids.push_back(t.rows[r][0]);
    psi.push_back(detail::csv_number(path, t.lines[r], t.rows[r][1]));
  }
  return {ids, psi};
}

// ---- re-dispatch step ----

struct StepInput {
  std::vector<std::string> ids;
  std::vector<double> x;
  std::vector<redispatch::FeatureLimits> limits;
  std::vector<double> planned;
};

/// Reads `feature_id,x,x_min,x_max,ramp,planned`.
inline StepInput read_bounds_csv(const std::string& path) {
  const auto t = detail::read_csv(path);
  detail::expect_header(t, path, {"feature_id", "x", "x_min", "x_max", "ramp", "planned"});
  StepInput in;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    auto num = [&](std::size_t j) { return detail::csv_number(path, t.lines[r], row[j]); };
    in.ids.push_back(row[0]);
    in.x.push_back(num(1));
    in.limits.push_back({num(2), num(3), num(4)});
    in.planned.push_back(num(5));
  }
  return in;
}

inline void write_solution_csv(std::ostream& os, const redispatch::LinearProgram& lp,
                               const redispatch::RedispatchSolution& s) {
  os << "status," << redispatch::to_string(s.status) << "\ndelta," << fmt(s.delta, "%.12e") << "\n\n";
  os << "feature_id,dx_r,dx_o,dx_total\n";
  for (std::size_t i = 0; i < lp.size(); ++i) {
    const double r = s.feasible() ? s.dx_r[i] : 0.0;
    os << lp.ids[i] << ',' << fmt(r, "%.12e") << ',' << fmt(lp.planned[i], "%.12e") << ','
       << fmt(r + lp.planned[i], "%.12e") << '\n';
  }
  os << "\nbinding\n";
  for (const auto& b : s.binding) os << b << '\n';
}

// ---- closed-loop logs ----

inline void write_minutes_csv(std::ostream& os, const loop::SimulationLog& log) {
  os << "t_s,zeta_true,zeta_est";
  for (const auto& id : log.generator_ids) os << ",p_" << id;
  os << '\n';
  for (const auto& m : log.minutes) {
    os << fmt(m.t, "%.0f") << ',' << fmt(m.zeta_true) << ',' << fmt(m.zeta_est);
    for (double p : m.dispatch) os << ',' << fmt(p);
    os << '\n';
  }
}

inline void write_intervals_csv(std::ostream& os, const loop::SimulationLog& log) {
  os << "interval,t_s,zeta_model,zeta_est,triggered,action,delta,t2_s,window";
  for (const auto& id : log.generator_ids) os << ",set_" << id;
  os << '\n';
  for (const auto& r : log.intervals) {
    os << r.index << ',' << fmt(r.t, "%.0f") << ',' << fmt(r.zeta_model) << ',' << fmt(r.zeta_est) << ','
       << (r.triggered ? 1 : 0) << ',' << r.action << ','
       << (r.solution && r.solution->feasible() ? fmt(r.solution->delta) : std::string("")) << ','
       << fmt(r.t2, "%.3f") << ',' << r.window;
    for (double v : r.setpoint_after) os << ',' << fmt(v);
    os << '\n';
  }
}

inline nlohmann::ordered_json events_json(const loop::SimulationLog& log) {
  nlohmann::ordered_json j;
  j["aborted"] = log.aborted;
  if (log.aborted) j["abort_reason"] = log.abort_reason;
  auto events = nlohmann::ordered_json::array();
  for (const auto& r : log.intervals) {
    if (!r.triggered && r.action == "none") continue;
    nlohmann::ordered_json e;
    e["interval"] = r.index;
    e["t_s"] = r.t;
    e["zeta_est"] = r.zeta_est;
    e["zeta_model"] = r.zeta_model;
    e["action"] = r.action;
    if (!r.reason.empty()) e["reason"] = r.reason;
    e["features"] = r.features;
    if (r.estimate) e["estimate"] = estimate_json(*r.estimate);
    if (r.solution) {
      nlohmann::ordered_json s;
      s["status"] = std::string(redispatch::to_string(r.solution->status));
      s["delta"] = r.solution->delta;
      s["dx_r"] = r.solution->dx_r;
      s["binding"] = r.solution->binding;
      e["solution"] = s;
    }
    e["t2_s"] = r.t2;
    e["window"] = r.window;
    events.push_back(std::move(e));
  }
  j["events"] = std::move(events);
  j["triggers"] = std::count_if(log.intervals.begin(), log.intervals.end(), [](const auto& r) { return r.triggered; });
  return j;
}

}  // namespace damprd::io

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "damprd/errors.hpp"
#include "damprd/estimator/feature.hpp"
#include "damprd/estimator/naer.hpp"
#include "damprd/estimator/reduce.hpp"
#include "damprd/grid/power_flow.hpp"
#include "damprd/io/case_file.hpp"
#include "damprd/io/scenario_file.hpp"
#include "damprd/io/tables.hpp"
#include "damprd/loop/closed_loop.hpp"
#include "damprd/redispatch/bounds.hpp"
#include "damprd/redispatch/lp.hpp"
#include "damprd/small_signal/fault.hpp"
#include "damprd/small_signal/modes.hpp"
#include "damprd/small_signal/sensitivity_oracle.hpp"

namespace damprd::io {

/// Everything one CLI invocation needs.  Unset optionals keep the defaults
/// of the module or scenario.
struct RunManifest {
  std::string subcommand;
  std::string case_path;
  std::string scenario_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::optional<double> t1;
  std::optional<double> ridge_k;
  std::optional<int> ensemble;
  std::optional<bool> reserve;
  std::optional<bool> balance;
  std::optional<std::size_t> features;
  std::optional<double> noise_zeta;
  bool debug_lp = false;
  bool dump_windows = false;  // simulate: windows/window_<k>.csv per estimate

  // subcommand inputs
  std::string samples_path;   // estimate
  std::string psi_path;       // optimize-step
  std::string bounds_path;    // optimize-step
  std::string dispatch_path;  // powerflow/modes/sens-oracle/fault: generator,p_pu
  double load_scale = 1.0;
  double oracle_step = 0.01;
  std::optional<int> fault_bus;
  double fault_start = 1.0;
  double fault_clear = 1.1;
  double fault_horizon = 20.0;
  double fault_step = 0.01;
  std::string pair;  // "G1,G3"
};

namespace detail {

inline std::ofstream open_out(const RunManifest& m, const std::string& name) {
  const auto path = std::filesystem::path(m.out_dir) / name;
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw PreconditionError("cannot write " + path.string());
  return os;
}

inline grid::NetworkCase require_case(const RunManifest& m) {
  if (m.case_path.empty()) throw PreconditionError(m.subcommand + ": --case is required");
  return parse_case_file(m.case_path);
}

/// Base dispatch, optionally overridden by a `generator,p_pu` CSV.
inline std::vector<double> dispatch_for(const RunManifest& m, const grid::NetworkCase& c) {
  auto d = c.base_dispatch();
  if (m.dispatch_path.empty()) return d;
  const auto t = read_csv(m.dispatch_path);
  expect_header(t, m.dispatch_path, {"generator", "p_pu"});
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    d[c.generator_index(t.rows[r][0])] = csv_number(m.dispatch_path, t.lines[r], t.rows[r][1]);
  return d;
}

inline grid::OperatingPoint operating_point(const RunManifest& m, const grid::NetworkCase& c) {
  grid::PowerFlowOptions opt;
  if (m.reserve.value_or(false)) opt.capacity_margin = redispatch::reserve_fraction;
  return grid::solve_power_flow(c, dispatch_for(m, c), grid::LoadLevels::base(c).scaled(m.load_scale), opt);
}

inline std::string percent(double z) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%7.3f%%", 100.0 * z);
  return buf;
}

}  // namespace detail

inline int cmd_powerflow(const RunManifest& m, std::ostream& out) {
  const auto c = detail::require_case(m);
  const auto op = detail::operating_point(m, c);
  auto os = detail::open_out(m, "powerflow.csv");
  write_power_flow(os, c, op);
  write_power_flow(out, c, op);
  return 0;
}

inline int cmd_modes(const RunManifest& m, std::ostream& out) {
  const auto c = detail::require_case(m);
  const auto op = detail::operating_point(m, c);
  const auto modes = small_signal::eigen_modes(small_signal::linearize(c, op), c);
  auto os = detail::open_out(m, "modes.csv");
  write_modes(os, c, modes);
  out << "  sigma(1/s)   omega(rad/s)   zeta      f(Hz)   class\n";
  char buf[160];
  for (const auto& md : modes) {
    std::snprintf(buf, sizeof buf, "%11.5f  %12.5f  %s  %7.4f   %s\n", md.eigenvalue.real(), md.eigenvalue.imag(),
                  detail::percent(md.damping).c_str(), md.frequency, std::string(small_signal::to_string(md.kind)).c_str());
    out << buf;
  }
  std::size_t em = 0, ia = 0;
  for (const auto& md : modes) {
    em += md.electromechanical();
    ia += md.kind == small_signal::ModeClass::inter_area;
  }
  out << em << " electromechanical modes, " << ia << " inter-area\n";
  return 0;
}

inline int cmd_sens_oracle(const RunManifest& m, std::ostream& out) {
  const auto c = detail::require_case(m);
  const auto op = detail::operating_point(m, c);
  const auto modes = small_signal::eigen_modes(small_signal::linearize(c, op), c);
  const auto& mode = small_signal::min_damping_mode(modes, small_signal::TargetModes::inter_area);
  const auto feats = estimator::reduce_features(c, mode, m.features.value_or(c.generators.size()));
  small_signal::OracleOptions opt;
  opt.step = m.oracle_step;
  opt.target = small_signal::TargetModes::inter_area;
  if (m.reserve.value_or(false)) opt.power_flow.capacity_margin = redispatch::reserve_fraction;
  const auto psi = small_signal::perturbation_sensitivity(c, op, feats, opt);
  auto os = detail::open_out(m, "sensitivity_oracle.csv");
  for (std::ostream* s : {static_cast<std::ostream*>(&os), &out}) {
    *s << "feature_id,psi\n";
    for (std::size_t f = 0; f < feats.size(); ++f) *s << feats[f].id << ',' << fmt(psi[static_cast<Eigen::Index>(f)], "%.12e") << '\n';
  }
  out << "mode: " << fmt(mode.frequency, "%.4f") << " Hz, zeta " << detail::percent(mode.damping) << '\n';
  return 0;
}

inline int cmd_estimate(const RunManifest& m, std::ostream& out) {
  if (m.samples_path.empty()) throw PreconditionError("estimate: --samples is required");
  const auto win = read_samples_csv(m.samples_path);
  estimator::EstimatorConfig cfg;
  if (m.ridge_k) cfg.ridge_k = *m.ridge_k;
  if (m.ensemble) cfg.ensemble = *m.ensemble;
  if (m.seed) cfg.seed = *m.seed;
  const auto est = estimator::naer_estimate(win, cfg);
  auto os = detail::open_out(m, "estimate.csv");
  write_estimate_csv(os, est);
  write_estimate_csv(out, est);
  auto js = detail::open_out(m, "estimate.json");
  js << estimate_json(est).dump(2) << '\n';
  out << "N " << est.samples << ", condition " << fmt(est.condition, "%.3e") << (est.flagged ? " (flagged)" : "") << '\n';
  return est.flagged ? 2 : 0;
}

inline int cmd_optimize_step(const RunManifest& m, std::ostream& out) {
  if (m.psi_path.empty() || m.bounds_path.empty())
    throw PreconditionError("optimize-step: --psi and --bounds are required");
  const auto [ids, psi] = read_estimate_csv(m.psi_path);
  const auto in = read_bounds_csv(m.bounds_path);
  if (ids != in.ids) throw PreconditionError("optimize-step: feature ids of --psi and --bounds differ");
  const auto bounds = redispatch::compute_bounds(in.x, in.limits, m.reserve.value_or(false));
  std::vector<double> planned = in.planned;
  if (std::any_of(bounds.at_limit.begin(), bounds.at_limit.end(), [](bool b) { return b; }))
    planned = redispatch::redistribute_planned(planned, bounds.at_limit, bounds);
  const auto lp = redispatch::build_lp(ids, psi, bounds, planned, m.balance.value_or(true));
  const auto sol = redispatch::solve_lp(lp);
  if (m.debug_lp) {
    auto lo = detail::open_out(m, "lp.txt");
    redispatch::dump(lo, lp);
    redispatch::dump(out, lp);
  }
  auto os = detail::open_out(m, "solution.csv");
  write_solution_csv(os, lp, sol);
  write_solution_csv(out, lp, sol);
  return sol.feasible() ? 0 : 3;
}

inline loop::Scenario scenario_for(const RunManifest& m) {
  if (m.scenario_path.empty()) throw PreconditionError("simulate: --scenario is required");
  auto s = parse_scenario_file(m.scenario_path);
  if (!m.case_path.empty()) {
    s.network = parse_case_file(m.case_path);
    s.case_path = m.case_path;
  }
  if (m.seed) s.seed = *m.seed;
  if (m.threshold) s.threshold = *m.threshold;
  if (m.t1) s.t1 = *m.t1;
  if (m.ridge_k) s.estimator.ridge_k = *m.ridge_k;
  if (m.ensemble) s.estimator.ensemble = *m.ensemble;
  if (m.reserve) s.reserve = *m.reserve;
  if (m.balance) s.balance = *m.balance;
  if (m.features) s.feature_budget = *m.features;
  if (m.noise_zeta) s.noise_zeta = *m.noise_zeta;
  s.validate();
  return s;
}

inline int cmd_simulate(const RunManifest& m, std::ostream& out) {
  const auto s = scenario_for(m);
  const auto log = loop::run(s);
  auto a = detail::open_out(m, "minutes.csv");
  write_minutes_csv(a, log);
  auto b = detail::open_out(m, "intervals.csv");
  write_intervals_csv(b, log);
  auto e = detail::open_out(m, "events.json");
  e << events_json(log).dump(2) << '\n';
  if (m.dump_windows) {
    for (const auto& r : log.intervals) {
      if (!r.samples) continue;
      auto w = detail::open_out(m, "windows/window_" + std::to_string(r.index) + ".csv");
      write_samples_csv(w, *r.samples);
    }
  }
  std::size_t triggers = 0, redispatches = 0;
  for (const auto& r : log.intervals) {
    triggers += r.triggered;
    redispatches += r.action == "redispatch";
  }
  out << log.intervals.size() << " intervals, " << triggers << " triggers, " << redispatches << " re-dispatches\n";
  if (!log.intervals.empty())
    out << "final zeta_min (model) " << detail::percent(log.intervals.back().zeta_model) << '\n';
  if (log.aborted) {
    out << "aborted: " << log.abort_reason << '\n';
    return 1;
  }
  return 0;
}

inline int cmd_fault(const RunManifest& m, std::ostream& out) {
  const auto c = detail::require_case(m);
  const auto op = detail::operating_point(m, c);
  if (!m.fault_bus) throw PreconditionError("fault: --bus is required");
  small_signal::FaultSpec f{*m.fault_bus, m.fault_start, m.fault_clear, m.fault_horizon, m.fault_step};
  const auto tr = small_signal::fault_simulate(c, op, f);
  auto os = detail::open_out(m, "trajectory.csv");
  small_signal::write_trajectory_csv(os, c, tr);

  const auto modes = small_signal::eigen_modes(small_signal::linearize(c, op), c);
  const auto& mode = small_signal::min_damping_mode(modes, small_signal::TargetModes::inter_area);
  nlohmann::ordered_json j;
  std::vector<double> y;
  std::string label;
  if (!m.pair.empty()) {
    const auto comma = m.pair.find(',');
    if (comma == std::string::npos) throw PreconditionError("fault: --pair expects two generator ids, e.g. G1,G3");
    const std::size_t a = c.generator_index(m.pair.substr(0, comma));
    const std::size_t b = c.generator_index(m.pair.substr(comma + 1));
    y = small_signal::relative_angle(tr, a, b);
    j["signal"] = nlohmann::ordered_json::array({c.generators[a].id, c.generators[b].id});
    label = c.generators[a].id + " vs " + c.generators[b].id;
  } else {
    // Coherent groups of the target mode against each other.
    y = small_signal::group_angle(tr, c, mode.shape);
    std::vector<std::string> ga, gb;
    for (std::size_t i = 0; i < c.generators.size(); ++i)
      (mode.shape[static_cast<Eigen::Index>(i)].real() >= 0.0 ? ga : gb).push_back(c.generators[i].id);
    j["signal"] = nlohmann::ordered_json::array({ga, gb});
    label = "group angle";
  }
  j["unstable"] = tr.unstable;
  j["eigen_zeta"] = mode.damping;
  j["eigen_freq_hz"] = mode.frequency;
  int code = 0;
  try {
    const auto est = small_signal::trajectory_damping(tr.t, y, mode.frequency, f.clear);
    j["logdec_zeta"] = est.zeta;
    j["peaks"] = est.peak_times.size();
    out << "log-decrement zeta " << detail::percent(est.zeta) << ", eigen zeta " << detail::percent(mode.damping)
        << " (" << label << ")\n";
  } catch (const EstimationError& e) {
    j["logdec_zeta"] = nullptr;
    j["error"] = e.what();
    out << e.what() << '\n';
    code = 4;
  }
  if (tr.unstable) {
    out << "trajectory unstable, integration stopped at t = " << fmt(tr.t.back(), "%.3f") << " s\n";
    code = 5;
  }
  auto js = detail::open_out(m, "fault.json");
  js << j.dump(2) << '\n';
  return code;
}

/// Dispatches a subcommand; errors are reported on `err` with a non-zero
/// status rather than thrown.
inline int run_subcommand(const RunManifest& m, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (m.subcommand == "powerflow") return cmd_powerflow(m, out);
    if (m.subcommand == "modes") return cmd_modes(m, out);
    if (m.subcommand == "sens-oracle") return cmd_sens_oracle(m, out);
    if (m.subcommand == "estimate") return cmd_estimate(m, out);
    if (m.subcommand == "optimize-step") return cmd_optimize_step(m, out);
    if (m.subcommand == "simulate") return cmd_simulate(m, out);
    if (m.subcommand == "fault") return cmd_fault(m, out);
    err << "unknown subcommand '" << m.subcommand << "'\n";
    return 64;
  } catch (const std::exception& e) {
    err << m.subcommand << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace damprd::io

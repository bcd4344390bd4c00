#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "damprd/io/commands.hpp"

namespace {

void common(CLI::App* sub, damprd::io::RunManifest& m) {
  sub->add_option("--out", m.out_dir, "output directory")->capture_default_str();
  sub->add_flag("--reserve,!--no-reserve", m.reserve, "use 20% of Pmax reserve as extra headroom");
}

void with_case(CLI::App* sub, damprd::io::RunManifest& m) {
  sub->add_option("--case", m.case_path, "network case file")->required()->check(CLI::ExistingFile);
  sub->add_option("--dispatch", m.dispatch_path, "CSV generator,p_pu overriding the base dispatch")
      ->check(CLI::ExistingFile);
  sub->add_option("--load-scale", m.load_scale, "factor applied to all loads")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Damping-constrained generation re-dispatch toolkit"};
  app.require_subcommand(1);
  damprd::io::RunManifest m;

  auto* pf = app.add_subcommand("powerflow", "solve the AC power flow");
  with_case(pf, m);
  common(pf, m);

  auto* md = app.add_subcommand("modes", "small-signal modes of the operating point");
  with_case(md, m);
  common(md, m);

  auto* so = app.add_subcommand("sens-oracle", "finite-difference damping sensitivities");
  with_case(so, m);
  common(so, m);
  so->add_option("--features", m.features, "feature budget");
  so->add_option("--step", m.oracle_step, "perturbation step (p.u.)")->capture_default_str();

  auto* es = app.add_subcommand("estimate", "NAER sensitivity estimate from a sample window");
  common(es, m);
  es->add_option("--samples", m.samples_path, "CSV t,dzeta,<feature ids>")->required()->check(CLI::ExistingFile);
  es->add_option("--seed", m.seed, "ensemble seed");
  es->add_option("--ridge-k", m.ridge_k, "ridge parameter");
  es->add_option("--ensemble", m.ensemble, "ensemble size");

  auto* op = app.add_subcommand("optimize-step", "one re-dispatch linear program");
  common(op, m);
  op->add_option("--psi", m.psi_path, "CSV feature_id,psi_hat[,ensemble_std]")->required()->check(CLI::ExistingFile);
  op->add_option("--bounds", m.bounds_path, "CSV feature_id,x,x_min,x_max,ramp,planned")
      ->required()
      ->check(CLI::ExistingFile);
  op->add_flag("--balance,!--no-balance", m.balance, "enforce sum of re-dispatch = 0");
  op->add_flag("--debug-lp", m.debug_lp, "print the assembled LP");

  auto* sim = app.add_subcommand("simulate", "closed-loop day simulation");
  common(sim, m);
  sim->add_option("--scenario", m.scenario_path, "scenario file")->required()->check(CLI::ExistingFile);
  sim->add_option("--case", m.case_path, "override the scenario's case file")->check(CLI::ExistingFile);
  sim->add_option("--seed", m.seed, "random seed");
  sim->add_option("--threshold", m.threshold, "damping threshold (ratio, e.g. 0.03)");
  sim->add_option("--t1", m.t1, "decision interval (s)");
  sim->add_option("--ridge-k", m.ridge_k, "ridge parameter");
  sim->add_option("--ensemble", m.ensemble, "ensemble size");
  sim->add_flag("--balance,!--no-balance", m.balance, "enforce sum of re-dispatch = 0");
  sim->add_option("--features", m.features, "feature budget");
  sim->add_option("--noise-zeta", m.noise_zeta, "damping measurement noise std");
  sim->add_flag("--dump-windows", m.dump_windows, "write each estimator window to windows/");

  auto* ft = app.add_subcommand("fault", "time-domain fault simulation");
  with_case(ft, m);
  common(ft, m);
  ft->add_option("--bus", m.fault_bus, "faulted bus id")->required();
  ft->add_option("--start", m.fault_start, "fault instant (s)")->capture_default_str();
  ft->add_option("--clear", m.fault_clear, "clearing instant (s)")->capture_default_str();
  ft->add_option("--horizon", m.fault_horizon, "simulated time (s)")->capture_default_str();
  ft->add_option("--step", m.fault_step, "integration step (s)")->capture_default_str();
  ft->add_option("--pair", m.pair, "relative angle pair, e.g. G1,G3");

  CLI11_PARSE(app, argc, argv);
  m.subcommand = app.get_subcommands().front()->get_name();
  return damprd::io::run_subcommand(m);
}

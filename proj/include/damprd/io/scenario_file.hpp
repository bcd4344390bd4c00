#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "damprd/errors.hpp"
#include "damprd/io/case_file.hpp"
#include "damprd/loop/scenario.hpp"

namespace damprd::io {

namespace detail {

/// Two-column CSV with a header row; returns (first, second) columns.
inline void read_series(const std::string& path, std::vector<double>& a, std::vector<double>& b) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open profile " + path);
  std::string line;
  int lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(located(path, lineno, 0, "expected two comma-separated fields"), lineno);
    auto num = [&](std::string s, int col) {
      const auto first = s.find_first_not_of(" \t");
      const auto last = s.find_last_not_of(" \t");
      s = first == std::string::npos ? "" : s.substr(first, last - first + 1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ParseError(located(path, lineno, col, "expected a number, got '" + s + "'"), lineno, col);
      return v;
    };
    const double t = num(line.substr(0, comma), 1);
    const double v = num(line.substr(comma + 1), static_cast<int>(comma + 2));
    if (!a.empty() && !(t > a.back()))
      throw ParseError(located(path, lineno, 1, "time column must be strictly increasing"), lineno, 1);
    a.push_back(t);
    b.push_back(v);
  }
}

}  // namespace detail

/// Key/value scenario file.  Paths are relative to the scenario file.
///
///   case <path>                   load_profile <load id|*> <csv>
///   planned <generator id> <csv>  horizon_h / horizon_s / t1 / threshold ...
inline loop::Scenario parse_scenario(std::istream& in, const std::string& source,
                                     const std::filesystem::path& base_dir) {
  struct Pending {
    std::string key, id, path;
    int line;
  };
  std::vector<Pending> refs;
  loop::Scenario s;
  std::string case_path;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tokens = detail::tokenize(line);
    if (tokens.empty()) continue;
    const detail::RecordReader r(source, lineno, tokens);
    const std::string& key = r.text(0);
    auto one = [&]() {
      r.expect_fields(2, 2, "scenario " + key);
      return r.number(1);
    };
    if (key == "case") {
      r.expect_fields(2, 2, "scenario case");
      case_path = (base_dir / r.text(1)).lexically_normal().string();
    } else if (key == "load_profile" || key == "planned") {
      r.expect_fields(3, 3, "scenario " + key);
      refs.push_back({key, r.text(1), (base_dir / r.text(2)).lexically_normal().string(), lineno});
    } else if (key == "horizon_h") s.horizon = one() * 3600.0;
    else if (key == "horizon_s") s.horizon = one();
    else if (key == "t1") s.t1 = one();
    else if (key == "threshold") s.threshold = one();
    else if (key == "sample_period") s.sample_period = one();
    else if (key == "noise_zeta") s.noise_zeta = one();
    else if (key == "noise_zeta_tau") s.noise_zeta_tau = one();
    else if (key == "load_fluctuation") s.load_fluctuation = one();
    else if (key == "gen_fluctuation") s.gen_fluctuation = one();
    else if (key == "seed") s.seed = static_cast<std::uint64_t>(one());
    else if (key == "reserve") s.reserve = one() != 0.0;
    else if (key == "features") s.feature_budget = static_cast<std::size_t>(one());
    else if (key == "ramp_fraction") s.ramp_fraction = one();
    else if (key == "ramp_time") s.ramp_time = one();
    else if (key == "balance") s.balance = one() != 0.0;
    else if (key == "min_samples") s.min_samples = static_cast<std::size_t>(one());
    else if (key == "ridge_k") s.estimator.ridge_k = one();
    else if (key == "ensemble") s.estimator.ensemble = static_cast<int>(one());
    else if (key == "forgetting") s.estimator.forgetting = one();
    else if (key == "ensemble_noise") s.estimator.noise_fraction = one();
    else if (key == "condition_cap") s.estimator.condition_cap = one();
    else if (key == "sensitivity") {
      r.expect_fields(2, 2, "scenario sensitivity");
      if (r.text(1) == "naer") s.sensitivity = loop::SensitivitySource::naer;
      else if (r.text(1) == "oracle") s.sensitivity = loop::SensitivitySource::oracle;
      else r.fail("sensitivity must be naer or oracle", r.column(1));
    } else {
      r.fail("unknown scenario key '" + key + "'", r.column(0));
    }
  }
  if (case_path.empty()) throw ParseError(detail::located(source, lineno, 0, "scenario names no case"), lineno);
  s.case_path = case_path;
  s.network = parse_case_file(case_path);
  s.load_profiles.assign(s.network.loads.size(), {});
  s.planned.assign(s.network.generators.size(), {});
  for (const auto& ref : refs) {
    std::vector<double> t, v;
    detail::read_series(ref.path, t, v);
    try {
      if (ref.key == "load_profile") {
        for (std::size_t l = 0; l < s.network.loads.size(); ++l)
          if (ref.id == "*" || s.network.loads[l].id == ref.id) s.load_profiles[l] = {t, v};
        if (ref.id != "*") s.network.load_index(ref.id);
      } else {
        s.planned[s.network.generator_index(ref.id)] = {t, v};
      }
    } catch (const PreconditionError& e) {
      throw ParseError(detail::located(source, ref.line, 0, e.what()), ref.line);
    }
  }
  s.validate();
  return s;
}

inline loop::Scenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open scenario file " + path);
  return parse_scenario(in, path, std::filesystem::path(path).parent_path());
}

}  // namespace damprd::io

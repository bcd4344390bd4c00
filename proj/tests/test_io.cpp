#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "damprd/io/case_file.hpp"
#include "damprd/io/commands.hpp"
#include "damprd/io/scenario_file.hpp"
#include "damprd/io/tables.hpp"
#include "support.hpp"

using namespace damprd;
namespace fs = std::filesystem;

namespace {

const char* kTwoBus = R"([SYSTEM]
base_mva 100
frequency 50

[BUS]
1 slack 20 1.02
2 PQ 20

[BRANCH]
1 2 0.01 0.1 0.0

[GEN]
G1 1 5.0 2.0 0.3 2.0 0.2 S1 1 1.0

[LOAD]
L2 2 0.8 0.2
)";

grid::NetworkCase parse(const std::string& text) {
  std::istringstream in(text);
  return io::parse_case(in, "mem.case");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Fresh scratch directory per test, removed afterwards.
class Scratch : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("damprd_io_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST(CaseFile, ParsesTwoBusCase) {
  const auto c = parse(kTwoBus);
  EXPECT_EQ(c.frequency, 50.0);
  ASSERT_EQ(c.buses.size(), 2u);
  EXPECT_EQ(c.buses[0].kind, grid::BusKind::slack);
  EXPECT_DOUBLE_EQ(c.buses[0].v_set, 1.02);
  EXPECT_DOUBLE_EQ(c.buses[1].v_set, 1.0);
  ASSERT_EQ(c.branches.size(), 1u);
  EXPECT_TRUE(c.branches[0].in_service);
  ASSERT_EQ(c.generators.size(), 1u);
  EXPECT_EQ(c.generators[0].station, "S1");
  EXPECT_DOUBLE_EQ(c.generators[0].p_set, 1.0);
  ASSERT_EQ(c.loads.size(), 1u);
  EXPECT_DOUBLE_EQ(c.loads[0].q, 0.2);
}

TEST(CaseFile, TwoSlacksNameBothLines) {
  std::string text = kTwoBus;
  text.replace(text.find("2 PQ 20"), 7, "2 slack 20");
  try {
    parse(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 6"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 7"), std::string::npos) << msg;
  }
}

TEST(CaseFile, UnknownBusReportsLine) {
  std::string text = kTwoBus;
  text.replace(text.find("L2 2"), 4, "L2 9");
  try {
    parse(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 16);
    EXPECT_NE(std::string(e.what()).find("unknown bus 9"), std::string::npos);
  }
}

TEST(CaseFile, BadNumberReportsColumn) {
  std::string text = kTwoBus;
  text.replace(text.find("0.8 0.2"), 3, "0,8");
  try {
    parse(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 16);
    EXPECT_EQ(e.column(), 6);
    EXPECT_NE(std::string(e.what()).find("mem.case:16:6"), std::string::npos);
  }
}

TEST(CaseFile, RejectsMalformedRecords) {
  auto fails = [](std::string text, const std::string& from, const std::string& to) {
    text.replace(text.find(from), from.size(), to);
    EXPECT_THROW(parse(text), ParseError) << to;
  };
  fails(kTwoBus, "[LOAD]", "[LOADS]");
  fails(kTwoBus, "2 PQ 20", "2 PX 20");
  fails(kTwoBus, "1 2 0.01 0.1 0.0", "1 2 0.0 0.0 0.0");
  fails(kTwoBus, "S1 1 1.0", "S1 maybe 1.0");
  fails(kTwoBus, "2.0 0.2 S1", "0.2 2.0 S1");
  fails(kTwoBus, "G1 1 5.0", "G1 1 -5.0");
  fails(kTwoBus, "base_mva 100", "base_mva 100 7");
  fails(kTwoBus, "L2 2 0.8 0.2", "L2 2 0.8 0.2\nL2 2 0.1 0.0");
}

TEST(CaseFile, KundurCounts) {
  const auto c = test::load_case("kundur_2area");
  EXPECT_EQ(c.buses.size(), 11u);
  EXPECT_EQ(c.branches.size(), 12u);
  EXPECT_EQ(c.generators.size(), 4u);
  EXPECT_EQ(c.loads.size(), 2u);
}

TEST(CaseFile, SerializeRoundTrip) {
  for (const char* name : {"kundur_2area", "eight_machine", "sixteen_machine"}) {
    const auto c = test::load_case(name);
    const std::string text = io::serialize_case(c);
    EXPECT_EQ(parse(text), c) << name;
    EXPECT_EQ(io::serialize_case(parse(text)), text) << name;
  }
}

TEST(ScenarioFile, ShippedScenariosParse) {
  const auto s = io::parse_scenario_file(test::data_path("scenarios/kundur_day.scn"));
  EXPECT_EQ(s.horizon, 24 * 3600.0);
  EXPECT_EQ(s.t1, 900.0);
  EXPECT_EQ(s.threshold, 0.03);
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.network.generators.size(), 4u);
  EXPECT_DOUBLE_EQ(s.load_profiles[0].at(540 * 60.0), 1.05);
  EXPECT_DOUBLE_EQ(s.load_profiles[1].at(540 * 60.0), 1.05);
  EXPECT_TRUE(s.planned[2].t_min.empty());
  EXPECT_DOUBLE_EQ(s.planned[3].increment(0.0, 900.0), -0.3);
  EXPECT_NO_THROW(io::parse_scenario_file(test::data_path("scenarios/kundur_day_exhausted.scn")));
  EXPECT_NO_THROW(io::parse_scenario_file(test::data_path("scenarios/eight_machine_window.scn")));
}

TEST(ScenarioFile, UnknownKeyReportsLine) {
  std::istringstream in("case ../cases/kundur_2area.case\nhorizon_h 1\nthreshhold 0.03\n");
  try {
    io::parse_scenario(in, "x.scn", test::data_path("scenarios"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("threshhold"), std::string::npos);
  }
}

TEST(ScenarioFile, UnknownGeneratorInPlanReportsLine) {
  std::istringstream in("case ../cases/kundur_2area.case\nplanned G9 profiles/kundur_planned_G4.csv\n");
  try {
    io::parse_scenario(in, "x.scn", test::data_path("scenarios"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST_F(Scratch, SamplesRoundTrip) {
  estimator::SampleWindow w({"A", "B"});
  w.push(std::vector<double>{0.1, -0.2}, 1e-4, 0.0);
  w.push(std::vector<double>{1.0 / 3.0, 2.5e-7}, -3e-5, 1.0);
  const auto p = dir_ / "w.csv";
  {
    std::ofstream os(p);
    io::write_samples_csv(os, w);
  }
  const auto r = io::read_samples_csv(p.string());
  EXPECT_EQ(r.feature_ids(), w.feature_ids());
  EXPECT_EQ(r.design(), w.design());
  EXPECT_EQ(r.response(), w.response());
}

TEST_F(Scratch, SamplesOutOfOrderIsParseError) {
  const auto p = dir_ / "w.csv";
  std::ofstream(p) << "t,dzeta,A\n0,0.1,1\n2,0.1,1\n1,0.2,3\n";
  try {
    io::read_samples_csv(p.string());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
  }
  std::ofstream(p) << "time,dzeta,A\n0,0.1,1\n";
  EXPECT_THROW(io::read_samples_csv(p.string()), ParseError);
}

TEST_F(Scratch, OptimizeStepFromFiles) {
  std::ofstream(dir_ / "psi.csv") << "feature_id,psi_hat,ensemble_std\nA,1e-3,0\nB,-1e-3,0\n";
  std::ofstream(dir_ / "bounds.csv") << "feature_id,x,x_min,x_max,ramp,planned\nA,5,1,9,0.5,0\nB,5,1,9,0.5,0\n";
  io::RunManifest m;
  m.subcommand = "optimize-step";
  m.out_dir = dir_.string();
  m.psi_path = (dir_ / "psi.csv").string();
  m.bounds_path = (dir_ / "bounds.csv").string();
  std::ostringstream out, err;
  ASSERT_EQ(io::run_subcommand(m, out, err), 0) << err.str();
  const std::string sol = slurp(dir_ / "solution.csv");
  EXPECT_NE(sol.find("status,optimal"), std::string::npos) << sol;
  EXPECT_NE(sol.find("A,5.000000000000e-01"), std::string::npos) << sol;
  EXPECT_NE(sol.find("B,-5.000000000000e-01"), std::string::npos) << sol;
}

TEST_F(Scratch, OptimizeStepMismatchedIdsFails) {
  std::ofstream(dir_ / "psi.csv") << "feature_id,psi_hat,ensemble_std\nA,1e-3,0\n";
  std::ofstream(dir_ / "bounds.csv") << "feature_id,x,x_min,x_max,ramp,planned\nB,5,1,9,0.5,0\n";
  io::RunManifest m;
  m.subcommand = "optimize-step";
  m.out_dir = dir_.string();
  m.psi_path = (dir_ / "psi.csv").string();
  m.bounds_path = (dir_ / "bounds.csv").string();
  std::ostringstream out, err;
  EXPECT_EQ(io::run_subcommand(m, out, err), 1);
  EXPECT_NE(err.str().find("differ"), std::string::npos);
}

TEST_F(Scratch, EstimateFromShippedSamples) {
  io::RunManifest m;
  m.subcommand = "estimate";
  m.out_dir = dir_.string();
  m.samples_path = test::data_path("samples/eight_machine_window.csv");
  m.seed = 11000034;
  std::ostringstream out, err;
  ASSERT_EQ(io::run_subcommand(m, out, err), 0) << err.str();
  const auto [ids, psi] = io::read_estimate_csv((dir_ / "estimate.csv").string());
  EXPECT_EQ(ids, (std::vector<std::string>{"G2", "G3", "G4", "G5", "G7", "G8"}));
  const auto j = nlohmann::json::parse(slurp(dir_ / "estimate.json"));
  EXPECT_EQ(j["samples"], 900);
  EXPECT_EQ(j["flagged"], false);
  EXPECT_EQ(j["seed"], 11000034u);
}

TEST_F(Scratch, SubcommandsAreByteDeterministic) {
  auto run_into = [&](io::RunManifest m, const std::string& sub) {
    m.out_dir = (dir_ / sub).string();
    std::ostringstream out, err;
    EXPECT_EQ(io::run_subcommand(m, out, err), 0) << err.str();
    return out.str();
  };
  io::RunManifest m;
  m.case_path = test::data_path("cases/kundur_2area.case");
  for (const char* sub : {"powerflow", "modes", "sens-oracle"}) {
    m.subcommand = sub;
    EXPECT_EQ(run_into(m, "a"), run_into(m, "b")) << sub;
  }
  for (const char* f : {"powerflow.csv", "modes.csv", "sensitivity_oracle.csv"})
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
}

TEST_F(Scratch, PowerflowCsvBalances) {
  io::RunManifest m;
  m.subcommand = "powerflow";
  m.case_path = test::data_path("cases/kundur_2area.case");
  m.out_dir = dir_.string();
  std::ostringstream out, err;
  ASSERT_EQ(io::run_subcommand(m, out, err), 0) << err.str();
  EXPECT_FALSE(slurp(dir_ / "powerflow.csv").empty());
}

TEST_F(Scratch, ModesReportsOneInterArea) {
  io::RunManifest m;
  m.subcommand = "modes";
  m.case_path = test::data_path("cases/kundur_2area.case");
  m.out_dir = dir_.string();
  std::ostringstream out, err;
  ASSERT_EQ(io::run_subcommand(m, out, err), 0) << err.str();
  EXPECT_NE(out.str().find("3 electromechanical modes, 1 inter-area"), std::string::npos) << out.str();
}

TEST_F(Scratch, ErrorsBecomeExitCodes) {
  io::RunManifest m;
  m.out_dir = dir_.string();
  std::ostringstream out, err;
  m.subcommand = "bogus";
  EXPECT_EQ(io::run_subcommand(m, out, err), 64);
  m.subcommand = "modes";
  m.case_path = (dir_ / "missing.case").string();
  EXPECT_EQ(io::run_subcommand(m, out, err), 1);
  EXPECT_NE(err.str().find("cannot open case file"), std::string::npos);
  m.subcommand = "fault";
  m.case_path = test::data_path("cases/kundur_2area.case");
  m.fault_bus = 8;
  m.fault_clear = 1.5;  // 0.5 s fault
  EXPECT_EQ(io::run_subcommand(m, out, err), 1);
}

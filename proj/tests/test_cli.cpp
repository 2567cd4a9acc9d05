#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / ("costas_cli_" + std::to_string(::getpid()) + ".out");
  const std::string cmd = std::string("\"") + COSTAS_LAB_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  r.out = ss.str();
  fs::remove(log);
  return r;
}

std::string cfg(const std::string& name) { return std::string(COSTAS_LAB_CONFIGS) + "/" + name; }

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("costas_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_temp(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

const char* kClassic = R"(model = classic_phase_space
loop_filter = lead_lag
tau1 = 0.1
tau2 = 0.029
L = 1000
omega1 = 10000
omega_delta_free = 0
dt = 1e-3
t_end = 30
)";

}  // namespace

TEST(Cli, SimulateLocksForZeroInitialState) {
  const fs::path d = temp_dir("sim");
  const Result r = run("simulate --config " + cfg("example2_black.cfg") + " --out " + (d / "t.csv").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("locked=true"), std::string::npos) << r.out;
  std::ifstream f(d / "t.csv");
  std::string header;
  std::getline(f, header);
  EXPECT_EQ(header, "t,theta_delta,g,g1,g2,omega2");
  fs::remove_all(d);
}

TEST(Cli, SimulateReportsNoLockForFilterOffset) {
  const Result r = run("simulate --config " + cfg("example5_red.cfg"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("locked=false"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("steady_theta=none"), std::string::npos) << r.out;
}

TEST(Cli, ConfigErrorsExitOne) {
  const fs::path d = temp_dir("bad");
  const auto unknown = write_temp(d, "u.cfg", std::string(kClassic) + "colour = red\n");
  Result r = run("simulate --config " + unknown.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("colour"), std::string::npos) << r.out;

  std::string bad_dt(kClassic);
  bad_dt.replace(bad_dt.find("dt = 1e-3"), 9, "dt = 0");
  r = run("simulate --config " + write_temp(d, "dt.cfg", bad_dt).string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("'dt'"), std::string::npos) << r.out;

  EXPECT_EQ(run("simulate --config " + (d / "missing.cfg").string()).code, 1);
  EXPECT_EQ(run("example 7").code, 1);
  EXPECT_EQ(run("example 0").code, 1);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("--help").code, 0);
  fs::remove_all(d);
}

TEST(Cli, IntegrationFailureExitsTwo) {
  const fs::path d = temp_dir("div");
  // RK4 is unstable on the low-pass blocks once omega3 * dt > 2.78
  const std::string text = R"(model = phase_space
omega3 = 1.2566e6
loop_filter = pi
tau1 = 2e-5
tau2 = 3.9789e-6
L = 4.8e6
omega1 = 2513274.1228718345
omega_delta_free = 1000
theta_delta = 1
dt = 1e-5
t_end = 1e-2
)";
  const Result r = run("simulate --config " + write_temp(d, "div.cfg", text).string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("last good t"), std::string::npos) << r.out;
  fs::remove_all(d);
}

TEST(Cli, PortraitClassifiesTrajectories) {
  const fs::path d = temp_dir("portrait");
  const Result r = run("portrait --config " + cfg("example6_classic.cfg") +
                       " --grid x=-0.05:0.15:3,theta=0:0:1 --outdir " + d.string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream f(d / "portrait_index.csv");
  std::string line;
  std::getline(f, line);
  EXPECT_EQ(line, "id,x0,theta0,verdict,file");
  int rows = 0, captured = 0, rotational = 0;
  while (std::getline(f, line)) {
    ++rows;
    captured += line.find(",captured,") != std::string::npos;
    rotational += line.find(",rotational,") != std::string::npos;
  }
  EXPECT_EQ(rows, 3);
  EXPECT_EQ(captured + rotational, 3);
  EXPECT_TRUE(fs::exists(d / "portrait_2.csv"));
  fs::remove_all(d);
}

TEST(Cli, PortraitRejectsNonClassicModel) {
  const fs::path d = temp_dir("portrait_bad");
  EXPECT_EQ(run("portrait --config " + cfg("example2_black.cfg") + " --grid x=0:1:2 --outdir " + d.string()).code, 1);
  fs::remove_all(d);
}

TEST(Cli, AvgcheckSingleFrequencyHasNoSlope) {
  const Result r = run("avgcheck --config " + cfg("modified_avg.cfg") + " --omega1 628318.53071795865");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("omega1,sup_error,flag"), std::string::npos);
  EXPECT_EQ(r.out.find("slope="), std::string::npos) << r.out;
}

TEST(Avgcheck, FlagsLargeDetuning) {
  const Result r = run("avgcheck --config " + cfg("modified_avg.cfg") + " --omega1 50000,100000");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("detuning-too-large"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("slope="), std::string::npos) << r.out;
}

TEST(Cli, PullinOverRange) {
  const Result r = run("pullin --config " + cfg("example6_classic.cfg") + " --range 0:89.45:89.45 --grid x=-0.0126:0.0123:9,theta=0:0:1");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("0,all-lock,0,10,true"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("89.450000000000003,some-escape"), std::string::npos) << r.out;
}

TEST(Cli, ExampleWritesSummary) {
  const fs::path d = temp_dir("ex6");
  const Result r = run("example 6 --outdir " + d.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(d / "example6_summary.txt"));
  EXPECT_NE(r.out.find("pass = true"), std::string::npos);
  fs::remove_all(d);
}

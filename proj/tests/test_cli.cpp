#include "sea/electromech.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun
{
    int code = -1;
    std::string out;
};

CliRun seactl(const std::string& args)
{
    const std::string cmd = std::string(SEACTL_PATH) + " " + args + " 2>&1";
    CliRun r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe))
        r.out += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test
{
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("seactl_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string at(const std::string& name) const { return (dir / name).string(); }

    fs::path dir;
};

// A fast closed-loop sweep that hits the thermal limit.
const std::string hot_closed = "sweep closed --amplitude-nm 8 --f-start 0.5 --f-end 12 --sweep-rate 0.05 --no-timestamp";

} // namespace

TEST_F(Cli, ThermalSteady)
{
    const CliRun zero = seactl("thermal steady --current 0");
    EXPECT_EQ(zero.code, 0);
    EXPECT_NE(zero.out.find("= 25 C"), std::string::npos) << zero.out;
    const CliRun one = seactl("thermal steady --current 1.0");
    EXPECT_EQ(one.code, 0);
    EXPECT_NE(one.out.find("83.7"), std::string::npos) << one.out;
}

TEST_F(Cli, ThermalOverload)
{
    const CliRun safe = seactl("thermal overload --current 0.5 --housing-temp 60");
    EXPECT_EQ(safe.code, 0);
    EXPECT_NE(safe.out.find("UNBOUNDED"), std::string::npos);
    const CliRun hot = seactl("thermal overload --current 2.5 --housing-temp 60");
    EXPECT_EQ(hot.code, 0);
    EXPECT_NE(hot.out.find("K_o"), std::string::npos);
    EXPECT_NE(hot.out.find("capped_at_5_tau1"), std::string::npos);
}

TEST_F(Cli, ExitCodes)
{
    EXPECT_EQ(seactl("thermal steady --current 3").code, 4);
    EXPECT_EQ(seactl("thermal overload --current 2 --housing-temp 140").code, 4);
    EXPECT_EQ(seactl("sweep open --set motor.Rr=1 --out " + at("x")).code, 2);
    EXPECT_EQ(seactl("sweep open --amplitude 2 --out " + at("x")).code, 2);
    EXPECT_EQ(seactl("sweep closed --load jl=0.1 --out " + at("x")).code, 2);
    {
        std::ofstream(at("bad.json")) << "{\n  \"motor.R\": 1,\n  \"oops\": 2\n}\n";
    }
    const CliRun bad = seactl("config check --config " + at("bad.json"));
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.out.find("bad.json:3"), std::string::npos) << bad.out;
    {
        std::ofstream(at("ts.csv")) << "time_s,current_A\n0,1\n1,1\n";
    }
    EXPECT_EQ(seactl("thermal estimate --telemetry " + at("ts.csv")).code, 2); // step above tau1/5
}

TEST_F(Cli, EmptyCsvFails)
{
    {
        std::ofstream(at("empty.csv"));
    }
    const CliRun r = seactl("sysid fit-tf --input " + at("empty.csv") + " --output " + at("fit.json"));
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(fs::exists(at("fit.json")));
}

TEST_F(Cli, ClosedSweepSummarySchema)
{
    const CliRun r = seactl(hot_closed + " --out " + at("hot"));
    EXPECT_EQ(r.code, 4) << r.out;
    const json s = json::parse(slurp(dir / "hot" / "summary.json"));
    for (const char* key : {"thermal_limit_hz", "accessible_bandwidth_hz", "bandwidth_3db_hz", "terminated_early"})
        EXPECT_TRUE(s.contains(key)) << key;
    EXPECT_TRUE(s["terminated_early"].get<bool>());
    EXPECT_EQ(s["accessible_bandwidth_hz"], s["thermal_limit_hz"]);
    const std::string csv = slurp(dir / "hot" / "sweep.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "freq_hz,torque_mag_nm,gain,winding_temp_c,housing_temp_c,pwm_rms");
    const json m = json::parse(slurp(dir / "hot" / "run_manifest.json"));
    EXPECT_FALSE(m.contains("timestamp"));
    EXPECT_EQ(m["config"]["sweep.amplitude"].get<double>(), 8.0);
}

TEST_F(Cli, RegulatorDoesNotLowerThermalLimit)
{
    seactl(hot_closed + " --thermal-regulator off --out " + at("off"));
    seactl(hot_closed + " --thermal-regulator on --out " + at("on"));
    const json off = json::parse(slurp(dir / "off" / "summary.json"));
    const json on = json::parse(slurp(dir / "on" / "summary.json"));
    ASSERT_FALSE(off["thermal_limit_hz"].is_null());
    const double limit_on = on["thermal_limit_hz"].is_null() ? 1e9 : on["thermal_limit_hz"].get<double>();
    EXPECT_GE(limit_on, off["thermal_limit_hz"].get<double>());
    EXPECT_TRUE(on["config"]["regulator.enabled"].get<bool>());
}

TEST_F(Cli, LighterLoadPeaksLater)
{
    const std::string base = "sweep open --amplitude 0.6 --f-start 0.5 --f-end 20 --sweep-rate 0.1 "
                             "--set sim.halt_at_t_max=false --no-timestamp";
    EXPECT_EQ(seactl(base + " --load jl=0.02 --out " + at("heavy")).code, 0);
    EXPECT_EQ(seactl(base + " --load jl=0.005 --out " + at("light")).code, 0);
    const json heavy = json::parse(slurp(dir / "heavy" / "summary.json"));
    const json light = json::parse(slurp(dir / "light" / "summary.json"));
    EXPECT_GT(light["peak_torque_freq_hz"].get<double>(), heavy["peak_torque_freq_hz"].get<double>());
}

TEST_F(Cli, Idempotent)
{
    const std::string args = "sweep open --amplitude 0.3 --f-start 1 --f-end 4 --sweep-rate 0.5 --no-timestamp --out ";
    ASSERT_EQ(seactl(args + at("a")).code, 0);
    ASSERT_EQ(seactl(args + at("b")).code, 0);
    for (const char* f : {"sweep.csv", "summary.json"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    // The manifest echoes the command line, which differs only in --out.
    json ma = json::parse(slurp(dir / "a" / "run_manifest.json"));
    json mb = json::parse(slurp(dir / "b" / "run_manifest.json"));
    EXPECT_EQ(ma["config"], mb["config"]);
}

TEST_F(Cli, OutputDirFromEnvironment)
{
    const std::string cmd = "sweep open --amplitude 0.3 --f-start 1 --f-end 3 --sweep-rate 0.5 --no-timestamp";
    const std::string env = "SEA_OUTPUT_DIR=" + at("env") + " ";
    const std::string full = env + std::string(SEACTL_PATH) + " " + cmd + " > /dev/null 2>&1";
    fs::create_directories(dir / "env");
    EXPECT_EQ(std::system(full.c_str()), 0);
    EXPECT_TRUE(fs::exists(dir / "env" / "summary.json"));
}

TEST_F(Cli, SweepThenFitRoundTrip)
{
    ASSERT_EQ(seactl("sweep open --amplitude 0.02 --f-start 0.2 --f-end 10 --sweep-rate 0.05 --no-timestamp --out " +
                     at("s"))
                  .code,
              0);
    const CliRun fit = seactl("sysid fit-tf --input " + at("s/sweep.csv") + " --output " + at("fit.json"));
    ASSERT_EQ(fit.code, 0) << fit.out;
    const json f = json::parse(slurp(dir / "fit.json"));
    const sea::Vec<double> truth = sea::output_locked_tf(sea::SeaParams{}).den();
    const double a0 = f["A0"].get<double>(), a1 = f["A1"].get<double>(), a2 = f["A2"].get<double>();
    EXPECT_NEAR(a0 / truth(3), 1.0, 0.02);
    EXPECT_NEAR(a1 / truth(2), 1.0, 0.02);
    EXPECT_NEAR(a2 / truth(1), 1.0, 0.02);
}

TEST_F(Cli, SynthAndFitComplexResponse)
{
    ASSERT_EQ(seactl("sysid synth-tf --output " + at("r.csv")).code, 0);
    ASSERT_EQ(seactl("sysid fit-tf --input " + at("r.csv") + " --output " + at("fit.json")).code, 0);
    const json f = json::parse(slurp(dir / "fit.json"));
    const sea::Vec<double> truth = sea::output_locked_tf(sea::SeaParams{}).den();
    EXPECT_NEAR(f["A3"].get<double>() / truth(0), 1.0, 1e-6);
    EXPECT_NEAR(f["A0"].get<double>() / truth(3), 1.0, 1e-6);
}

TEST_F(Cli, SelectNominalPicksMiddle)
{
    std::vector<std::string> files;
    for (const char* k : {"0.8", "1.0", "1.25"}) {
        const std::string path = at(std::string("m") + k + ".json");
        ASSERT_EQ(seactl(std::string("sysid synth-tf --jm-scale ") + k + " --output " + at("tmp.csv") +
                         " --model-out " + path)
                      .code,
                  0);
        files.push_back(path);
    }
    const CliRun r = seactl("sysid select-nominal --models " + files[0] + " " + files[1] + " " + files[2] +
                         " --output " + at("env.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("index = 1"), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(dir / "env.csv"));
}

TEST_F(Cli, ThermalFitRoundTrip)
{
    ASSERT_EQ(seactl("sysid synth-thermal --current 1 --duration 1200 --dt 0.1 --output " + at("step.csv")).code, 0);
    const CliRun r = seactl("sysid fit-thermal --input " + at("step.csv") + " --current 1 --output " + at("th.json"));
    ASSERT_EQ(r.code, 0) << r.out;
    const json f = json::parse(slurp(dir / "th.json"));
    EXPECT_NEAR(f["thermal.R1"].get<double>() / 5.368, 1.0, 0.01);
    // The fragment merges straight into a config.
    EXPECT_EQ(seactl("config check --config " + at("th.json")).code, 0);
}

TEST_F(Cli, ConfigDefaultsRoundTrip)
{
    const CliRun d = seactl("config defaults");
    ASSERT_EQ(d.code, 0);
    {
        std::ofstream(at("d.json")) << d.out;
    }
    EXPECT_EQ(seactl("config check --config " + at("d.json")).code, 0);
    const json j = json::parse(d.out);
    EXPECT_EQ(j["thermal.T_MAX"].get<double>(), 130.0);
}

TEST_F(Cli, EstimateStreamsCsv)
{
    {
        std::ofstream out(at("tel.csv"));
        out << "time_s,current_A,housing_temp_C\n";
        for (int k = 0; k <= 100; ++k)
            out << k * 0.01 << ",1.0,40\n";
    }
    const CliRun r = seactl("thermal estimate --telemetry " + at("tel.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "time_s,T_W_est_C");
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 102);
}

TEST_F(Cli, MonteCarloSeeded)
{
    const CliRun a = seactl("sysid monte-carlo --trials 20 --seed 7");
    const CliRun b = seactl("sysid monte-carlo --trials 20 --seed 7");
    EXPECT_EQ(a.code, 0) << a.out;
    EXPECT_EQ(a.out, b.out);
}

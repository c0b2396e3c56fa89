#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "compliance_lab/cli.hpp"
#include "compliance_lab/config.hpp"
#include "compliance_lab/csv_io.hpp"

using namespace clab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("clab_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

}  // namespace

TEST_CASE("empty config text yields the scenario II defaults") {
    const SimConfig cfg = parse_config("");
    CHECK(cfg.n == 1000);
    CHECK(cfg.control.alpha == 0.025);
    CHECK(cfg.control.beta == 0.1);
    CHECK(cfg.control.gamma == 0.95);
    CHECK(cfg.control.q_star == 0.85);
    CHECK(cfg.scenario == ScenarioKind::Both);
    CHECK(cfg.policy == PolicyKind::AdaptivePenalty);
    CHECK_FALSE(cfg.scaling.has_value());
}

TEST_CASE("config parsing handles comments, ranges and bad input") {
    const SimConfig cfg = parse_config(
        "# comment line\n"
        "n = 50       # trailing comment\n"
        "qstar = 0.8\n"
        "policy = event\n"
        "scenario = III\n"
        "seed = 42\n");
    CHECK(cfg.n == 50);
    CHECK(cfg.control.q_star == 0.8);
    CHECK(cfg.policy == PolicyKind::EventDriven);
    CHECK(cfg.scenario == ScenarioKind::IndividualOnlyDefectors);
    CHECK_FALSE(cfg.control.enable_global);
    CHECK(cfg.base_seed == 42);
    REQUIRE(cfg.defectors.has_value());
    CHECK(cfg.defectors->fraction == 0.10);

    CHECK_THROWS_AS(parse_config("gamma = 1.2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("alpha = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("frobnicate = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("n 50\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("n = \n"), ConfigError);
    CHECK_THROWS_AS(parse_config("n = 50\nn = 60\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("scenario = V\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("policy = bogus\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("n = twelve\n"), ConfigError);

    // Errors carry the line number and key.
    try {
        parse_config("n = 10\ngamma = 1.2\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("gamma") != std::string::npos);
    }
    try {
        parse_config("n = 10\nbogus_key = 1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("bogus_key") != std::string::npos);
    }
}

TEST_CASE("scaling keys derive the gains and exclude raw gains") {
    const SimConfig cfg = parse_config("epsilon = 0.04\nw = 1\nalpha0 = 1\nbeta0 = 1\n");
    REQUIRE(cfg.scaling.has_value());
    const ControlConfig ctl = cfg.effective_control();
    CHECK(ctl.alpha == Catch::Approx(0.008).margin(1e-15));
    CHECK(ctl.beta == Catch::Approx(0.04).margin(1e-15));
    CHECK(ctl.gamma == Catch::Approx(0.96).margin(1e-15));

    CHECK_THROWS_AS(parse_config("epsilon = 0.04\nalpha = 0.025\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("epsilon = 0.04\nbeta0 = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("epsilon = 0\n"), ConfigError);
}

TEST_CASE("serialize then parse is a fixed point") {
    for (const std::string text :
         {std::string(""), std::string("scenario = I\nreps = 7\nseed = 99\n"),
          std::string("scenario = IV\ndefector_frac = 0.25\ndefect_until = 33\npolicy = fixed\n"),
          std::string("epsilon = 0.02\nw = 1.5\nalpha0 = 0.7\nbeta0 = 0.9\nn = 128\n"),
          std::string("alpha = 0.0125\nbeta = 0.2\ngamma = 0.9\nqstar = 0.6\n"
                      "record_diagnostics = true\nunit_scale = 500\n")}) {
        const SimConfig cfg = parse_config(text);
        const std::string once = serialize_config(cfg);
        const std::string twice = serialize_config(parse_config(once));
        CHECK(once == twice);
    }
}

TEST_CASE("timeseries writing is byte-stable and re-readable") {
    TempDir tmp;
    AggregateResult agg;
    agg.reps = 1;
    agg.mean_m = {0.0, 1.0 / 3.0};
    agg.mean_mbar = {0.0, 0.05};
    agg.c_global = {0.0, 0.02125};
    agg.mean_c = {0.0, 0.085};
    agg.mbar_p10 = {0.0, 0.0};
    agg.mbar_p90 = {0.0, 0.1};
    agg.sd_mean_m = agg.sd_mean_mbar = agg.sd_c_global = agg.sd_mean_c = agg.sd_mbar_p10 =
        agg.sd_mbar_p90 = {0.0, 0.0};

    const auto path = (tmp.path / "ts.csv").string();
    write_timeseries(agg, path);
    const std::string bytes = slurp(path);
    CHECK(bytes.rfind("k,mean_m,mean_mbar,C,mean_c,mbar_p10,mbar_p90\n", 0) == 0);

    write_timeseries(agg, path);
    CHECK(slurp(path) == bytes);

    const auto rows = read_timeseries(path);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].k == 0);
    CHECK(rows[1].k == 1);
    // Round-trip at printed precision: writing the parsed rows reproduces the bytes.
    std::vector<TimeseriesRow> parsed = rows;
    CHECK(format_timeseries(parsed) == bytes);
}

TEST_CASE("zero-step aggregate writes header plus the initial row") {
    TempDir tmp;
    AggregateResult agg;
    agg.reps = 1;
    agg.mean_m = {0.0};
    agg.mean_mbar = {0.0};
    agg.c_global = {0.0};
    agg.mean_c = {0.0};
    agg.mbar_p10 = {0.0};
    agg.mbar_p90 = {0.0};
    const auto path = (tmp.path / "ts0.csv").string();
    write_timeseries(agg, path);
    CHECK(slurp(path) == "k,mean_m,mean_mbar,C,mean_c,mbar_p10,mbar_p90\n0,0,0,0,0,0,0\n");
}

TEST_CASE("cli rejects bad invocations with usage text") {
    CHECK(cli_dispatch({"compliance_lab"}) == 1);
    CHECK(cli_dispatch({"compliance_lab", "--bogus"}) == 1);
    CHECK(cli_dispatch({"compliance_lab", "scenario", "--kind", "V", "--out", "/tmp/x"}) == 1);
    CHECK(cli_dispatch({"compliance_lab", "frobnicate"}) == 1);
    CHECK(cli_dispatch({"compliance_lab", "--help"}) == 0);
}

TEST_CASE("cli scenario run emits the full artifact set") {
    TempDir tmp;
    const auto out = (tmp.path / "run").string();
    const int rc = cli_dispatch({"compliance_lab", "scenario", "--kind", "II", "--reps", "2",
                                 "--seed", "7", "--out", out});
    REQUIRE(rc == 0);
    for (const char* name : {"timeseries.csv", "agents.csv", "ledger.txt", "config.txt"})
        CHECK(fs::exists(fs::path(out) / name));

    // The emitted config re-parses and pins the same scenario and seed.
    const SimConfig cfg = parse_config(slurp(fs::path(out) / "config.txt"));
    CHECK(cfg.scenario == ScenarioKind::Both);
    CHECK(cfg.reps == 2);
    CHECK(cfg.base_seed == 7);

    // Horizon+1 rows.
    const auto rows = read_timeseries((fs::path(out) / "timeseries.csv").string());
    CHECK(rows.size() == 501);
}

TEST_CASE("cli simulate consumes a config file") {
    TempDir tmp;
    const auto cfg_path = tmp.path / "run.cfg";
    std::ofstream(cfg_path) << "n = 40\nhorizon = 30\nreps = 2\nseed = 3\nscenario = II\n";
    const auto out = (tmp.path / "out").string();
    REQUIRE(cli_dispatch({"compliance_lab", "simulate", "--config", cfg_path.string(), "--out",
                          out}) == 0);
    const auto rows = read_timeseries((fs::path(out) / "timeseries.csv").string());
    CHECK(rows.size() == 31);

    CHECK(cli_dispatch({"compliance_lab", "simulate", "--config",
                        (tmp.path / "missing.cfg").string(), "--out", out}) == 1);
    std::ofstream(tmp.path / "bad.cfg") << "gamma = 1.5\n";
    CHECK(cli_dispatch({"compliance_lab", "simulate", "--config",
                        (tmp.path / "bad.cfg").string(), "--out", out}) == 1);
}

TEST_CASE("cli ode emits a trajectory with the Lyapunov column") {
    TempDir tmp;
    const auto out = (tmp.path / "ode").string();
    REQUIRE(cli_dispatch({"compliance_lab", "ode", "--beta0", "0.5", "--w", "1", "--qstar",
                          "0.85", "--start", "0.1,0.9", "--T", "5", "--out", out}) == 0);
    const std::string body = slurp(fs::path(out) / "ode.csv");
    CHECK(body.rfind("t,z1,z2,V\n", 0) == 0);
    CHECK(std::count(body.begin(), body.end(), '\n') == 502);  // header + 501 points
}

TEST_CASE("cli audit accepts the emitted ledger and rejects a tampered one") {
    TempDir tmp;
    const auto cfg_path = tmp.path / "small.cfg";
    std::ofstream(cfg_path) << "n = 25\nhorizon = 40\nreps = 1\nseed = 5\n";
    const auto small_out = (tmp.path / "small").string();
    REQUIRE(cli_dispatch({"compliance_lab", "simulate", "--config", cfg_path.string(), "--out",
                          small_out}) == 0);

    const auto ledger_path = (fs::path(small_out) / "ledger.txt").string();
    const auto emitted_cfg = (fs::path(small_out) / "config.txt").string();
    CHECK(cli_dispatch({"compliance_lab", "audit", "--ledger", ledger_path, "--config",
                        emitted_cfg}) == 0);

    // Flip one digit of one amount.
    std::string text = slurp(ledger_path);
    const auto pos = text.rfind(",");
    REQUIRE(pos != std::string::npos);
    text[pos + 1] = text[pos + 1] == '9' ? '8' : '9';
    std::ofstream(ledger_path, std::ios::binary) << text;
    CHECK(cli_dispatch({"compliance_lab", "audit", "--ledger", ledger_path, "--config",
                        emitted_cfg}) == 2);

    CHECK(cli_dispatch({"compliance_lab", "audit", "--ledger", "/nonexistent", "--config",
                        emitted_cfg}) == 1);
}

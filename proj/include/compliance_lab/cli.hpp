#pragma once

// Command-line surface.
//
//   simulate --config FILE --out DIR
//   scenario --kind {I|II|III|IV} [--reps R] [--seed S] --out DIR
//   sweep    --epsilons LIST --w W --alpha0 A --beta0 B --out DIR
//   ode      --beta0 B --w W --qstar Q --start X,Y --T T --out DIR
//   audit    --ledger FILE --config FILE
//
// Exit codes: 0 success, 1 usage/validation error, 2 audit or invariant
// failure. Simulation commands write timeseries.csv, agents.csv, ledger.txt
// (repetition 0) and config.txt (the resolved configuration, ready to feed
// back into `simulate` or `audit`).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "compliance_lab/config.hpp"
#include "compliance_lab/csv_io.hpp"
#include "compliance_lab/montecarlo.hpp"
#include "compliance_lab/reference_dynamics.hpp"
#include "compliance_lab/replay.hpp"
#include "compliance_lab/scenarios.hpp"

namespace clab {

namespace detail {

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<double> parse_real_list(const std::string& csv) {
    std::vector<double> out;
    std::istringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    if (out.empty()) throw ConfigError("expected a comma-separated list of numbers: " + csv);
    return out;
}

inline int run_and_emit(const SimConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    EnsembleOptions opts;
    opts.ledger_rep0 = true;
    const auto runs = run_many(cfg, opts);
    const AggregateResult agg = aggregate(runs);

    const auto out = std::filesystem::path(out_dir);
    write_timeseries(agg, (out / "timeseries.csv").string());
    write_agents(agg, (out / "agents.csv").string());
    if (runs.front().ledger)
        write_ledger_file(*runs.front().ledger, (out / "ledger.txt").string());
    write_text_file((out / "config.txt").string(), serialize_config(cfg));

    const long k = runs.front().horizon();
    std::cout << "scenario " << scenario_tag(cfg.scenario) << ": n=" << cfg.n
              << " reps=" << cfg.reps << " horizon=" << k << '\n'
              << "final mean draw " << detail::g10(agg.mean_m.back()) << ", final mean average "
              << detail::g10(agg.mean_mbar.back()) << '\n'
              << "wrote " << (out / "timeseries.csv").string() << ", "
              << (out / "agents.csv").string() << ", " << (out / "ledger.txt").string() << ", "
              << (out / "config.txt").string() << '\n';
    return 0;
}

inline int run_audit(const std::string& ledger_path, const std::string& config_path) {
    const SimConfig cfg = parse_config(read_text_file(config_path));
    Ledger ledger(cfg.n);
    try {
        ledger = read_ledger_file(ledger_path, cfg.n);
    } catch (const std::invalid_argument& e) {
        // Structurally impossible log (e.g. a settlement above the stake).
        std::cerr << "audit: ledger invariant violated: " << e.what() << '\n';
        return 2;
    }
    const AuditReport report = audit_ledger(ledger, cfg);
    std::cout << "conservation: " << (report.conservation_ok ? "ok" : "FAIL") << '\n';
    if (report.complete) {
        std::cout << "signal replay: " << (report.signals_match ? "ok" : "FAIL") << '\n'
                  << "amounts: " << (report.amounts_match ? "ok" : "FAIL") << '\n';
    } else {
        std::cout << "signal replay: skipped (policy '" << policy_tag(cfg.policy)
                  << "' does not reveal per-step compliance; partial audit)\n";
    }
    if (!report.ok()) {
        std::cerr << "audit: FAILED" << (report.detail.empty() ? "" : ": " + report.detail)
                  << '\n';
        return 2;
    }
    std::cout << "audit: OK\n";
    return 0;
}

}  // namespace detail

inline int cli_dispatch(int argc, const char* const* argv) {
    CLI::App app{"Deposit-priced compliance control: simulator and verification harness"};
    app.require_subcommand(1);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run an ensemble from a config file");
    std::string sim_config_path, sim_out;
    simulate->add_option("--config", sim_config_path, "config file")->required();
    simulate->add_option("--out", sim_out, "output directory")->required();

    // scenario
    auto* scenario = app.add_subcommand("scenario", "run one of the standard scenarios");
    std::string scen_kind, scen_out;
    int scen_reps = -1;
    std::uint64_t scen_seed = 0;
    bool scen_seed_set = false;
    scenario->add_option("--kind", scen_kind, "I, II, III or IV")->required();
    scenario->add_option("--reps", scen_reps, "Monte Carlo repetitions");
    scenario->add_option("--seed", scen_seed, "base seed")->each([&](const std::string&) {
        scen_seed_set = true;
    });
    scenario->add_option("--out", scen_out, "output directory")->required();

    // sweep
    auto* sweep = app.add_subcommand("sweep", "epsilon sweep of the scaled gains");
    std::string sweep_eps, sweep_out;
    SweepConfig sweep_cfg;
    sweep->add_option("--epsilons", sweep_eps, "comma-separated epsilon list")->required();
    sweep->add_option("--w", sweep_cfg.base.w, "window rate w");
    sweep->add_option("--alpha0", sweep_cfg.base.alpha0, "alpha0");
    sweep->add_option("--beta0", sweep_cfg.base.beta0, "beta0");
    sweep->add_option("--n", sweep_cfg.n, "agents per run");
    sweep->add_option("--reps", sweep_cfg.reps, "repetitions per epsilon");
    sweep->add_option("--seed", sweep_cfg.base_seed, "base seed");
    sweep->add_option("--delta", sweep_cfg.delta, "deviation threshold");
    sweep->add_option("--out", sweep_out, "output directory")->required();

    // ode
    auto* ode = app.add_subcommand("ode", "integrate the reference dynamics");
    RefParams ode_params;
    std::string ode_start = "0,0", ode_out;
    double ode_T = 50.0, ode_dt = 0.0;
    ode->add_option("--beta0", ode_params.beta0, "beta0 in (0,1]");
    ode->add_option("--w", ode_params.w, "window rate w");
    ode->add_option("--qstar", ode_params.q_star, "target compliance");
    ode->add_option("--start", ode_start, "initial point x,y");
    ode->add_option("--T", ode_T, "integration time");
    ode->add_option("--dt", ode_dt, "step size (default min(0.01/w, 0.01))");
    ode->add_option("--out", ode_out, "output directory")->required();

    // audit
    auto* audit = app.add_subcommand("audit", "verify a ledger against its config");
    std::string audit_ledger_path, audit_config_path;
    audit->add_option("--ledger", audit_ledger_path, "ledger file")->required();
    audit->add_option("--config", audit_config_path, "config file of the recorded run")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*simulate) {
            const SimConfig cfg = parse_config(detail::read_text_file(sim_config_path));
            return detail::run_and_emit(cfg, sim_out);
        }
        if (*scenario) {
            const auto kind = scenario_from_tag(scen_kind);
            if (!kind) throw ConfigError("scenario --kind must be one of I, II, III, IV");
            ScenarioOverrides ov;
            if (scen_reps > 0) ov.reps = scen_reps;
            if (scen_seed_set) ov.seed = scen_seed;
            return detail::run_and_emit(build_scenario(*kind, ov), scen_out);
        }
        if (*sweep) {
            sweep_cfg.eps_list = detail::parse_real_list(sweep_eps);
            const SweepResult result = epsilon_sweep(sweep_cfg);
            std::filesystem::create_directories(sweep_out);
            const auto path = (std::filesystem::path(sweep_out) / "sweep.csv").string();
            write_sweep(result, path);
            std::cout << "wrote " << path << '\n';
            if (result.rows.size() >= 2)
                std::cout << "log-log slope of trailing MSD vs epsilon: "
                          << detail::g10(result.loglog_slope) << '\n';
            return 0;
        }
        if (*ode) {
            const auto xy = detail::parse_real_list(ode_start);
            if (xy.size() != 2) throw ConfigError("ode --start expects exactly two numbers");
            const OdeTrajectory traj =
                ode_integrate({xy[0], xy[1]}, ode_params, ode_T, ode_dt);
            std::filesystem::create_directories(ode_out);
            const auto path = (std::filesystem::path(ode_out) / "ode.csv").string();
            write_ode_trajectory(traj, ode_params, path);
            std::cout << "wrote " << path << '\n';
            return 0;
        }
        if (*audit) return detail::run_audit(audit_ledger_path, audit_config_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

inline int cli_dispatch(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const std::string& a : args) argv.push_back(a.c_str());
    return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace clab

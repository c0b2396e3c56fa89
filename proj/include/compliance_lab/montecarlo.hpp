#pragma once

// Seeded, parallel Monte Carlo engine for the closed loop.
//
// DETERMINISM CONTRACT: (config, base seed) determines every output byte.
// Rep r draws from the stream mix_seed(base_seed, r); proclivities and the
// defector set come from their own reserved streams of the same base seed, so
// the population is one fixed cohort observed under independent realizations.
// Reps run embarrassingly parallel into per-rep slots and are reduced in rep
// order after the join, so results are identical at any parallelism degree;
// COMPLIANCE_LAB_THREADS caps the worker count.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "compliance_lab/config.hpp"
#include "compliance_lab/core_model.hpp"
#include "compliance_lab/policy_ledger.hpp"
#include "compliance_lab/rng.hpp"
#include "compliance_lab/scenarios.hpp"
#include "compliance_lab/stats.hpp"

namespace clab {

struct RunConfig {
    SimConfig sim;
    std::uint64_t seed = 0;  // draw stream for this rep (already mixed)
    long horizon = 0;        // 0 = sim.horizon

    bool record_ledger = false;  // token ledger + policy transactions
    bool capture_full_c = false; // per-agent personal-signal series (audit)
    long stat_window = 0;        // keep per-agent running averages for the last N steps
};

struct RunResult {
    // Per-step series, length horizon+1; index 0 is the initial state.
    std::vector<double> mean_m;      // ensemble mean of the step's draws
    std::vector<double> mean_mbar;   // ensemble mean of the running averages
    std::vector<double> c_global;    // C(k)
    std::vector<double> mean_c;      // ensemble mean of the personal signals
    std::vector<double> mbar_p10;    // 10th percentile of running averages across agents
    std::vector<double> mbar_p90;    // 90th percentile

    // Per-agent summaries, length n, indexed by agent id.
    std::vector<double> agent_q;
    std::vector<double> agent_final_mbar;
    std::vector<double> agent_rate;      // draw rate over the last rate_window steps
    std::vector<double> agent_final_c;

    // Optional extras, present when requested.
    std::vector<double> xi_psum;                      // innovation partial sums, diag agent 0
    std::vector<std::vector<double>> trailing_mbar;   // [last stat_window steps][n]
    std::vector<std::vector<double>> c_by_agent;      // [horizon+1][n]
    std::optional<Ledger> ledger;

    long horizon() const { return static_cast<long>(mean_m.size()) - 1; }
};

namespace detail {

// Both percentiles from one sorted scratch copy (linear interpolation).
inline std::pair<double, double> p10_p90(const std::vector<AgentState>& states,
                                         std::vector<double>& scratch) {
    scratch.clear();
    for (const AgentState& s : states) scratch.push_back(s.m_bar);
    std::sort(scratch.begin(), scratch.end());
    auto at = [&](double q) {
        const double pos = q * static_cast<double>(scratch.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        if (lo + 1 >= scratch.size()) return scratch.back();
        return scratch[lo] + (pos - static_cast<double>(lo)) * (scratch[lo + 1] - scratch[lo]);
    };
    return {at(0.10), at(0.90)};
}

}  // namespace detail

inline RunResult run_single(const RunConfig& rc) {
    const SimConfig& sim = rc.sim;
    validate_config(sim);
    const ControlConfig ctl = sim.effective_control();
    const long horizon = rc.horizon > 0 ? rc.horizon : sim.horizon;
    if (horizon < 1) throw ConfigError("run_single: horizon must be >= 1");
    const int n = sim.n;

    const std::vector<double> q = sample_proclivities(
        n, sim.q_low, sim.q_high, rng::mix_seed(sim.base_seed, rng::kProclivityStream));
    std::vector<int> defector_ids;
    if (sim.defectors)
        defector_ids = select_defectors(n, *sim.defectors,
                                        rng::mix_seed(sim.base_seed, rng::kDefectorStream));

    EnsembleState st;
    st.params.resize(static_cast<std::size_t>(n));
    st.states.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        st.params[static_cast<std::size_t>(i)] = {i, q[static_cast<std::size_t>(i)]};
        st.states[static_cast<std::size_t>(i)] = {sim.init_c_individual, sim.mbar_init, 0, false};
    }
    st.global.c_global = sim.init_c_global;

    rng::Engine eng(rc.seed);

    std::optional<Ledger> ledger;
    std::optional<PolicyEngine> policy;
    if (rc.record_ledger) {
        ledger.emplace(n);
        policy.emplace(sim.policy, n, horizon, sim.contract_len);
        for (int i = 0; i < n; ++i)
            policy->enroll(*ledger, i,
                           bond_price(st.global.c_global, st.states[static_cast<std::size_t>(i)].c,
                                      sim.unit_scale),
                           0);
    }

    RunResult rr;
    const auto rows = static_cast<std::size_t>(horizon) + 1;
    rr.mean_m.reserve(rows);
    rr.mean_mbar.reserve(rows);
    rr.c_global.reserve(rows);
    rr.mean_c.reserve(rows);
    rr.mbar_p10.reserve(rows);
    rr.mbar_p90.reserve(rows);

    std::vector<double> scratch;
    scratch.reserve(static_cast<std::size_t>(n));
    auto record_row = [&]() {
        double sum_mbar = 0.0, sum_c = 0.0;
        for (const AgentState& s : st.states) {
            sum_mbar += s.m_bar;
            sum_c += s.c;
        }
        rr.mean_m.push_back(mean_last_m(st.states));
        rr.mean_mbar.push_back(sum_mbar / n);
        rr.c_global.push_back(st.global.c_global);
        rr.mean_c.push_back(sum_c / n);
        const auto [p10, p90] = detail::p10_p90(st.states, scratch);
        rr.mbar_p10.push_back(p10);
        rr.mbar_p90.push_back(p90);
    };
    record_row();

    const bool diag = sim.record_diagnostics;
    double xi_sum = 0.0;
    if (diag) {
        rr.xi_psum.reserve(rows);
        rr.xi_psum.push_back(0.0);
    }
    if (rc.capture_full_c) {
        rr.c_by_agent.reserve(rows);
        std::vector<double> c0(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) c0[static_cast<std::size_t>(i)] = st.states[static_cast<std::size_t>(i)].c;
        rr.c_by_agent.push_back(std::move(c0));
    }

    const long rate_window = std::min(sim.rate_window, horizon);
    std::vector<long> rate_counts(static_cast<std::size_t>(n), 0);
    const long stat_window = std::min(rc.stat_window, horizon);
    if (stat_window > 0) rr.trailing_mbar.reserve(static_cast<std::size_t>(stat_window));

    for (long k = 0; k < horizon; ++k) {
        const long draw_step = k + 1;
        if (sim.defectors) {
            const bool active = draw_step <= sim.defectors->defect_until;
            for (int id : defector_ids) st.states[static_cast<std::size_t>(id)].defecting = active;
        }
        double diag_prob = 0.0;
        if (diag)
            diag_prob = compliance_probability(st.params[0], st.states[0], st.global);

        step_ensemble(st, ctl, eng);

        if (diag) {
            xi_sum += static_cast<double>(st.states[0].last_m) - diag_prob;
            rr.xi_psum.push_back(xi_sum);
        }
        if (ledger) {
            for (int i = 0; i < n; ++i) {
                const AgentState& s = st.states[static_cast<std::size_t>(i)];
                policy->apply(*ledger, i, s.last_m,
                              bond_price(st.global.c_global, s.c, sim.unit_scale), draw_step);
            }
        }
        if (draw_step > horizon - rate_window)
            for (int i = 0; i < n; ++i)
                rate_counts[static_cast<std::size_t>(i)] += st.states[static_cast<std::size_t>(i)].last_m;
        if (stat_window > 0 && draw_step > horizon - stat_window) {
            std::vector<double> row(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) row[static_cast<std::size_t>(i)] = st.states[static_cast<std::size_t>(i)].m_bar;
            rr.trailing_mbar.push_back(std::move(row));
        }
        if (rc.capture_full_c) {
            std::vector<double> row(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) row[static_cast<std::size_t>(i)] = st.states[static_cast<std::size_t>(i)].c;
            rr.c_by_agent.push_back(std::move(row));
        }
        record_row();
    }

    if (ledger) {
        policy->settle_run_end(*ledger, horizon);
        rr.ledger = std::move(ledger);
    }

    rr.agent_q = q;
    rr.agent_final_mbar.resize(static_cast<std::size_t>(n));
    rr.agent_rate.resize(static_cast<std::size_t>(n));
    rr.agent_final_c.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        rr.agent_final_mbar[ui] = st.states[ui].m_bar;
        rr.agent_rate[ui] = static_cast<double>(rate_counts[ui]) / static_cast<double>(rate_window);
        rr.agent_final_c[ui] = st.states[ui].c;
    }
    return rr;
}

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("COMPLIANCE_LAB_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

struct EnsembleOptions {
    bool ledger_rep0 = false;
    bool capture_full_c_rep0 = false;
    long stat_window = 0;
    int threads = 0;  // 0 = COMPLIANCE_LAB_THREADS, else hardware concurrency
};

inline std::vector<RunResult> run_many(const SimConfig& sim, const EnsembleOptions& opts = {}) {
    validate_config(sim);
    const int reps = sim.reps;
    std::vector<RunResult> out(static_cast<std::size_t>(reps));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(reps));
    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            const int r = next.fetch_add(1);
            if (r >= reps) break;
            try {
                RunConfig rc;
                rc.sim = sim;
                rc.seed = rng::mix_seed(sim.base_seed, static_cast<std::uint64_t>(r));
                rc.record_ledger = opts.ledger_rep0 && r == 0;
                rc.capture_full_c = opts.capture_full_c_rep0 && r == 0;
                rc.stat_window = opts.stat_window;
                out[static_cast<std::size_t>(r)] = run_single(rc);
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
        }
    };
    const int n_threads = std::min(resolve_threads(opts.threads), reps);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

struct AggregateResult {
    int reps = 0;
    // Across-rep mean and standard deviation of each per-step series.
    std::vector<double> mean_m, mean_mbar, c_global, mean_c, mbar_p10, mbar_p90;
    std::vector<double> sd_mean_m, sd_mean_mbar, sd_c_global, sd_mean_c, sd_mbar_p10, sd_mbar_p90;
    // Across-rep means of the per-agent summaries.
    std::vector<double> agent_q, agent_final_mbar, agent_rate, agent_final_c;
};

namespace detail {

template <typename Member>
inline void mean_sd_series(const std::vector<RunResult>& runs, Member member,
                           std::vector<double>& mean_out, std::vector<double>& sd_out) {
    const std::size_t len = (runs.front().*member).size();
    const auto reps = static_cast<double>(runs.size());
    mean_out.assign(len, 0.0);
    sd_out.assign(len, 0.0);
    for (const RunResult& r : runs) {
        const auto& s = r.*member;
        for (std::size_t k = 0; k < len; ++k) mean_out[k] += s[k];
    }
    for (std::size_t k = 0; k < len; ++k) mean_out[k] /= reps;
    for (const RunResult& r : runs) {
        const auto& s = r.*member;
        for (std::size_t k = 0; k < len; ++k) {
            const double d = s[k] - mean_out[k];
            sd_out[k] += d * d;
        }
    }
    for (std::size_t k = 0; k < len; ++k) sd_out[k] = std::sqrt(sd_out[k] / reps);
}

template <typename Member>
inline std::vector<double> mean_agents(const std::vector<RunResult>& runs, Member member) {
    const std::size_t len = (runs.front().*member).size();
    std::vector<double> out(len, 0.0);
    for (const RunResult& r : runs) {
        const auto& s = r.*member;
        for (std::size_t i = 0; i < len; ++i) out[i] += s[i];
    }
    for (double& v : out) v /= static_cast<double>(runs.size());
    return out;
}

}  // namespace detail

// Order-independent reduction: runs arrive indexed by rep, sums run in rep
// order, so the aggregate does not depend on scheduling.
inline AggregateResult aggregate(const std::vector<RunResult>& runs) {
    if (runs.empty()) throw std::invalid_argument("aggregate: no runs");
    AggregateResult agg;
    agg.reps = static_cast<int>(runs.size());
    detail::mean_sd_series(runs, &RunResult::mean_m, agg.mean_m, agg.sd_mean_m);
    detail::mean_sd_series(runs, &RunResult::mean_mbar, agg.mean_mbar, agg.sd_mean_mbar);
    detail::mean_sd_series(runs, &RunResult::c_global, agg.c_global, agg.sd_c_global);
    detail::mean_sd_series(runs, &RunResult::mean_c, agg.mean_c, agg.sd_mean_c);
    detail::mean_sd_series(runs, &RunResult::mbar_p10, agg.mbar_p10, agg.sd_mbar_p10);
    detail::mean_sd_series(runs, &RunResult::mbar_p90, agg.mbar_p90, agg.sd_mbar_p90);
    agg.agent_q = detail::mean_agents(runs, &RunResult::agent_q);
    agg.agent_final_mbar = detail::mean_agents(runs, &RunResult::agent_final_mbar);
    agg.agent_rate = detail::mean_agents(runs, &RunResult::agent_rate);
    agg.agent_final_c = detail::mean_agents(runs, &RunResult::agent_final_c);
    return agg;
}

inline AggregateResult run_ensemble(const SimConfig& sim, const EnsembleOptions& opts = {}) {
    return aggregate(run_many(sim, opts));
}

// Empirical P(|Mbar_i(k) - Qstar| > delta), pooled over reps, agents and the
// last `window` recorded steps. Requires stat_window recording.
inline double deviation_probability(const std::vector<RunResult>& runs, double delta,
                                    long window, double q_star) {
    if (!(delta > 0.0)) throw std::invalid_argument("deviation_probability: delta must be > 0");
    long exceed = 0, total = 0;
    for (const RunResult& r : runs) {
        const auto recorded = static_cast<long>(r.trailing_mbar.size());
        if (recorded < window)
            throw std::invalid_argument("deviation_probability: window exceeds recorded steps");
        for (long j = recorded - window; j < recorded; ++j)
            for (double v : r.trailing_mbar[static_cast<std::size_t>(j)]) {
                exceed += std::abs(v - q_star) > delta ? 1 : 0;
                ++total;
            }
    }
    return static_cast<double>(exceed) / static_cast<double>(total);
}

// Per-agent variant of the deviation estimate (the concentration statement
// is per agent); pools reps and window steps for each agent separately.
inline std::vector<double> deviation_probability_per_agent(const std::vector<RunResult>& runs,
                                                           double delta, long window,
                                                           double q_star) {
    if (!(delta > 0.0))
        throw std::invalid_argument("deviation_probability_per_agent: delta must be > 0");
    if (runs.empty() || runs.front().trailing_mbar.empty())
        throw std::invalid_argument("deviation_probability_per_agent: nothing recorded");
    const std::size_t n = runs.front().trailing_mbar.front().size();
    std::vector<long> exceed(n, 0);
    long rows = 0;
    for (const RunResult& r : runs) {
        const auto recorded = static_cast<long>(r.trailing_mbar.size());
        if (recorded < window)
            throw std::invalid_argument(
                "deviation_probability_per_agent: window exceeds recorded steps");
        for (long j = recorded - window; j < recorded; ++j) {
            const auto& row = r.trailing_mbar[static_cast<std::size_t>(j)];
            for (std::size_t i = 0; i < n; ++i)
                exceed[i] += std::abs(row[i] - q_star) > delta ? 1 : 0;
            ++rows;
        }
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<double>(exceed[i]) / static_cast<double>(rows);
    return out;
}

// Pooled E[(Mbar_i - Qstar)^2] over the same trailing window.
inline double trailing_msd(const std::vector<RunResult>& runs, long window, double q_star) {
    double acc = 0.0;
    long total = 0;
    for (const RunResult& r : runs) {
        const auto recorded = static_cast<long>(r.trailing_mbar.size());
        if (recorded < window)
            throw std::invalid_argument("trailing_msd: window exceeds recorded steps");
        for (long j = recorded - window; j < recorded; ++j)
            for (double v : r.trailing_mbar[static_cast<std::size_t>(j)]) {
                acc += (v - q_star) * (v - q_star);
                ++total;
            }
    }
    return acc / static_cast<double>(total);
}

// Empirical E[ || sum_{j<=k} theta(j) ||^2 ] for theta_1 = w * xi of the
// diagnostic agent; entry k corresponds to the sum over the first k steps.
inline std::vector<double> martingale_diagnostic(const std::vector<RunResult>& runs, double w) {
    if (runs.empty() || runs.front().xi_psum.empty())
        throw std::invalid_argument("martingale_diagnostic: diagnostics were not recorded");
    const std::size_t len = runs.front().xi_psum.size();
    std::vector<double> out(len, 0.0);
    for (const RunResult& r : runs)
        for (std::size_t k = 0; k < len; ++k) {
            const double s = w * r.xi_psum[k];
            out[k] += s * s;
        }
    for (double& v : out) v /= static_cast<double>(runs.size());
    return out;
}

struct SweepConfig {
    ScalingParams base;             // epsilon is overridden per row
    std::vector<double> eps_list;
    int n = 200;
    int reps = 50;
    std::uint64_t base_seed = 1;
    double q_star = 0.85;
    double q_low = 0.1;
    double q_high = 0.35;
    double delta = 0.1;
    double horizon_slow_time = 60.0;  // horizon = ceil(slow time / epsilon)
    int threads = 0;
};

struct SweepRow {
    double epsilon = 0.0;
    ControlConfig gains;
    long horizon = 0;
    long window = 0;
    double msd = 0.0;        // trailing E[(Mbar - Qstar)^2]
    double deviation = 0.0;  // trailing P(|Mbar - Qstar| > delta)
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double delta = 0.0;
    double loglog_slope = std::numeric_limits<double>::quiet_NaN();  // needs >= 2 rows
};

// Derives gains for each epsilon, runs the ensemble to stationarity, and
// reports the trailing mean-squared deviation plus the deviation probability;
// fits the log-log slope of MSD against epsilon.
inline SweepResult epsilon_sweep(const SweepConfig& sc) {
    if (sc.eps_list.empty()) throw std::invalid_argument("epsilon_sweep: empty epsilon list");
    SweepResult result;
    result.delta = sc.delta;
    for (double eps : sc.eps_list) {
        ScalingParams sp = sc.base;
        sp.epsilon = eps;
        SimConfig sim;
        apply_scenario(sim, ScenarioKind::Both);
        sim.n = sc.n;
        sim.reps = sc.reps;
        sim.base_seed = sc.base_seed;
        sim.scaling = sp;
        sim.control.q_star = sc.q_star;
        sim.q_low = sc.q_low;
        sim.q_high = sc.q_high;
        sim.horizon = static_cast<long>(std::ceil(sc.horizon_slow_time / eps));
        SweepRow row;
        row.epsilon = eps;
        row.gains = sim.effective_control();
        row.horizon = sim.horizon;
        row.window = std::max<long>(1, sim.horizon / 4);
        EnsembleOptions opts;
        opts.stat_window = row.window;
        opts.threads = sc.threads;
        const auto runs = run_many(sim, opts);
        row.msd = trailing_msd(runs, row.window, sc.q_star);
        row.deviation = deviation_probability(runs, sc.delta, row.window, sc.q_star);
        result.rows.push_back(row);
    }
    if (result.rows.size() >= 2) {
        std::vector<double> lx, ly;
        for (const SweepRow& r : result.rows) {
            lx.push_back(std::log(r.epsilon));
            ly.push_back(std::log(r.msd));
        }
        result.loglog_slope = stats::fit_slope(lx, ly);
    }
    return result;
}

}  // namespace clab

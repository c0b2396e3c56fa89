#pragma once

// CSV emission for experiment outputs. All real numbers print with %.10g so
// files are byte-stable for fixed inputs and reproducible with any plotting
// tool; reruns with the same config and seed produce identical bytes.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "compliance_lab/montecarlo.hpp"
#include "compliance_lab/reference_dynamics.hpp"

namespace clab {

struct TimeseriesRow {
    long k = 0;
    double mean_m = 0.0;
    double mean_mbar = 0.0;
    double c_global = 0.0;
    double mean_c = 0.0;
    double mbar_p10 = 0.0;
    double mbar_p90 = 0.0;
};

inline std::vector<TimeseriesRow> timeseries_rows(const AggregateResult& agg) {
    std::vector<TimeseriesRow> rows(agg.mean_m.size());
    for (std::size_t k = 0; k < rows.size(); ++k)
        rows[k] = {static_cast<long>(k), agg.mean_m[k],   agg.mean_mbar[k], agg.c_global[k],
                   agg.mean_c[k],        agg.mbar_p10[k], agg.mbar_p90[k]};
    return rows;
}

namespace detail {

inline std::string g10(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace detail

inline std::string format_timeseries(const std::vector<TimeseriesRow>& rows) {
    std::string s = "k,mean_m,mean_mbar,C,mean_c,mbar_p10,mbar_p90\n";
    for (const TimeseriesRow& r : rows) {
        s += std::to_string(r.k);
        for (double v : {r.mean_m, r.mean_mbar, r.c_global, r.mean_c, r.mbar_p10, r.mbar_p90}) {
            s += ',';
            s += detail::g10(v);
        }
        s += '\n';
    }
    return s;
}

inline void write_timeseries(const AggregateResult& agg, const std::string& path) {
    auto out = detail::open_out(path);
    out << format_timeseries(timeseries_rows(agg));
    detail::finish(out, path);
}

inline std::vector<TimeseriesRow> read_timeseries(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "k,mean_m,mean_mbar,C,mean_c,mbar_p10,mbar_p90")
        throw std::runtime_error("timeseries file: unexpected header in " + path);
    std::vector<TimeseriesRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        TimeseriesRow r;
        char c;
        std::istringstream ls(line);
        if (!(ls >> r.k >> c >> r.mean_m >> c >> r.mean_mbar >> c >> r.c_global >> c >>
              r.mean_c >> c >> r.mbar_p10 >> c >> r.mbar_p90))
            throw std::runtime_error("timeseries file: malformed row in " + path);
        rows.push_back(r);
    }
    return rows;
}

// Per-agent summary, sorted by agent id ascending.
inline void write_agents(const AggregateResult& agg, const std::string& path) {
    auto out = detail::open_out(path);
    out << "agent_id,q,final_mbar,compliance_rate_last100,final_c\n";
    for (std::size_t i = 0; i < agg.agent_q.size(); ++i)
        out << i << ',' << detail::g10(agg.agent_q[i]) << ','
            << detail::g10(agg.agent_final_mbar[i]) << ',' << detail::g10(agg.agent_rate[i])
            << ',' << detail::g10(agg.agent_final_c[i]) << '\n';
    detail::finish(out, path);
}

inline void write_sweep(const SweepResult& sweep, const std::string& path) {
    auto out = detail::open_out(path);
    out << "epsilon,alpha,beta,gamma,horizon,window,trailing_msd,deviation_probability\n";
    for (const SweepRow& r : sweep.rows)
        out << detail::g10(r.epsilon) << ',' << detail::g10(r.gains.alpha) << ','
            << detail::g10(r.gains.beta) << ',' << detail::g10(r.gains.gamma) << ','
            << r.horizon << ',' << r.window << ',' << detail::g10(r.msd) << ','
            << detail::g10(r.deviation) << '\n';
    detail::finish(out, path);
}

inline void write_ode_trajectory(const OdeTrajectory& traj, const RefParams& params,
                                 const std::string& path) {
    auto out = detail::open_out(path);
    out << "t,z1,z2,V\n";
    for (std::size_t j = 0; j < traj.points.size(); ++j) {
        const RefPoint& z = traj.points[j];
        out << detail::g10(traj.time_at(j)) << ',' << detail::g10(z.y1) << ','
            << detail::g10(z.y2) << ',' << detail::g10(lyapunov_value(z, params)) << '\n';
    }
    detail::finish(out, path);
}

}  // namespace clab

#pragma once

// Builders for the four standard experiment scenarios.
//
//   I    global signal only (personal loop disabled)
//   II   both signals
//   III  personal signals only, 10% defectors for the first 100 steps
//   IV   both signals, same defectors
//
// Shared defaults: n=1000, alpha=0.025, beta=0.1, gamma=0.95, qstar=0.85,
// C(0)=0, c_i(0)=0, proclivities sampled uniformly from [0.1, 0.35],
// horizon 500, 150 repetitions.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "compliance_lab/config.hpp"
#include "compliance_lab/rng.hpp"

namespace clab {

// n independent uniform draws from [low, high]; deterministic in seed.
inline std::vector<double> sample_proclivities(int n, double low, double high,
                                               std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("sample_proclivities: n must be >= 0");
    if (!(0.0 <= low && low <= high && high <= 1.0))
        throw std::invalid_argument("sample_proclivities: need 0 <= low <= high <= 1");
    rng::Engine eng(seed);
    std::vector<double> q(static_cast<std::size_t>(n));
    for (double& v : q) v = low + (high - low) * rng::unit_uniform(eng);
    return q;
}

// Defector ids, sorted ascending. Uniform sample without replacement via a
// partial Fisher-Yates shuffle, or simply the lowest ids when requested.
inline std::vector<int> select_defectors(int n, const DefectorConfig& d,
                                         std::uint64_t derived_seed) {
    const int count = std::min(d.count(n), n);
    std::vector<int> ids;
    if (count <= 0) return ids;
    if (d.lowest_index) {
        ids.resize(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) ids[static_cast<std::size_t>(i)] = i;
        return ids;
    }
    rng::Engine eng(d.selection_seed.value_or(derived_seed));
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < count; ++i) {
        const auto span = static_cast<std::uint64_t>(n - i);
        const auto j = i + static_cast<int>(eng() % span);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    ids.assign(pool.begin(), pool.begin() + count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

struct ScenarioOverrides {
    std::optional<int> n;
    std::optional<long> horizon;
    std::optional<int> reps;
    std::optional<std::uint64_t> seed;
    std::optional<PolicyKind> policy;
    std::optional<double> defector_frac;
    std::optional<long> defect_until;
    std::optional<bool> record_diagnostics;
};

inline SimConfig build_scenario(ScenarioKind kind, const ScenarioOverrides& ov = {}) {
    SimConfig cfg;
    apply_scenario(cfg, kind);
    if (ov.n) cfg.n = *ov.n;
    if (ov.horizon) cfg.horizon = *ov.horizon;
    if (ov.reps) cfg.reps = *ov.reps;
    if (ov.seed) cfg.base_seed = *ov.seed;
    if (ov.policy) cfg.policy = *ov.policy;
    if (ov.record_diagnostics) cfg.record_diagnostics = *ov.record_diagnostics;
    if (ov.defector_frac || ov.defect_until) {
        if (!cfg.defectors) cfg.defectors = DefectorConfig{};
        if (ov.defector_frac) cfg.defectors->fraction = *ov.defector_frac;
        if (ov.defect_until) cfg.defectors->defect_until = *ov.defect_until;
    }
    validate_config(cfg);
    return cfg;
}

}  // namespace clab

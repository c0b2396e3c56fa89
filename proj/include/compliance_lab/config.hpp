#pragma once

// Experiment configuration and the flat `key = value` config file format.
//
// Keys: n, alpha, beta, gamma, qstar, epsilon, w, alpha0, beta0, q_low,
// q_high, horizon, scenario, defector_frac, defect_until, policy, unit_scale,
// reps, seed, record_diagnostics. `#` starts a comment. Unknown keys are
// errors. Missing keys take the scenario II defaults (the standard parameter
// block: n=1000, alpha=0.025, beta=0.1, gamma=0.95, qstar=0.85).
//
// Gains come from exactly one source: either the raw keys (alpha, beta,
// gamma) or the scaled parameterization (epsilon, w, alpha0, beta0); mixing
// the two groups is an error. The scenario key selects which feedback loops
// are enabled and, for III/IV, attaches the standard defector block; explicit
// defector_frac / defect_until keys refine it.

#include <cctype>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "compliance_lab/core_model.hpp"
#include "compliance_lab/policy_ledger.hpp"

namespace clab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ScenarioKind { GlobalOnly, Both, IndividualOnlyDefectors, BothDefectors };

struct DefectorConfig {
    double fraction = 0.10;    // in [0,1)
    long defect_until = 100;   // draws at steps <= defect_until are forced to 0
    std::optional<std::uint64_t> selection_seed;  // default: derived from the base seed
    bool lowest_index = false;                    // debugging override: pick ids 0..count-1

    int count(int n) const {
        return static_cast<int>(std::llround(fraction * static_cast<double>(n)));
    }
};

struct SimConfig {
    int n = 1000;
    ControlConfig control;                  // raw gains; ignored in theorem mode
    std::optional<ScalingParams> scaling;   // theorem mode: gains derived from these
    double q_low = 0.1;
    double q_high = 0.35;
    long horizon = 500;
    ScenarioKind scenario = ScenarioKind::Both;
    std::optional<DefectorConfig> defectors;
    PolicyKind policy = PolicyKind::AdaptivePenalty;
    std::uint64_t unit_scale = kMicroPerToken;  // micro-tokens per unit of signal
    int reps = 150;
    std::uint64_t base_seed = 1;
    bool record_diagnostics = false;

    // Programmatic knobs, not part of the file format.
    double mbar_init = 0.0;        // initial running average (alternative: q_star)
    double init_c_global = 0.0;    // C(0)
    double init_c_individual = 0.0;
    long contract_len = 0;         // FixedPenalty contract length; 0 = whole run
    long rate_window = 100;        // per-agent compliance-rate window

    ControlConfig effective_control() const {
        if (!scaling) return control;
        ControlConfig cfg = derive_gains(*scaling);
        cfg.enable_global = control.enable_global;
        cfg.enable_individual = control.enable_individual;
        cfg.q_star = control.q_star;
        return cfg;
    }
};

inline const char* scenario_tag(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::GlobalOnly: return "I";
        case ScenarioKind::Both: return "II";
        case ScenarioKind::IndividualOnlyDefectors: return "III";
        case ScenarioKind::BothDefectors: return "IV";
    }
    return "?";
}

inline std::optional<ScenarioKind> scenario_from_tag(std::string_view s) {
    if (s == "I") return ScenarioKind::GlobalOnly;
    if (s == "II") return ScenarioKind::Both;
    if (s == "III") return ScenarioKind::IndividualOnlyDefectors;
    if (s == "IV") return ScenarioKind::BothDefectors;
    return std::nullopt;
}

inline const char* policy_tag(PolicyKind k) {
    switch (k) {
        case PolicyKind::FixedPenalty: return "fixed";
        case PolicyKind::AdaptivePenalty: return "adaptive";
        case PolicyKind::EventDriven: return "event";
    }
    return "?";
}

inline std::optional<PolicyKind> policy_from_tag(std::string_view s) {
    if (s == "fixed") return PolicyKind::FixedPenalty;
    if (s == "adaptive") return PolicyKind::AdaptivePenalty;
    if (s == "event") return PolicyKind::EventDriven;
    return std::nullopt;
}

// Applies a scenario's loop switches and defector block on top of the shared
// defaults. I: global loop only. II: both loops. III: individual loop only
// plus the standard 10% / k<=100 defectors. IV: both loops plus defectors.
inline void apply_scenario(SimConfig& cfg, ScenarioKind kind) {
    cfg.scenario = kind;
    cfg.control.enable_global = (kind != ScenarioKind::IndividualOnlyDefectors);
    cfg.control.enable_individual = (kind != ScenarioKind::GlobalOnly);
    if (kind == ScenarioKind::IndividualOnlyDefectors || kind == ScenarioKind::BothDefectors) {
        if (!cfg.defectors) cfg.defectors = DefectorConfig{};
    } else {
        cfg.defectors.reset();
    }
}

inline void validate_config(const SimConfig& cfg) {
    if (cfg.n < 1) throw ConfigError("n must be >= 1");
    if (cfg.horizon < 1) throw ConfigError("horizon must be >= 1");
    if (cfg.reps < 1) throw ConfigError("reps must be >= 1");
    if (cfg.unit_scale < 1) throw ConfigError("unit_scale must be >= 1");
    if (!(cfg.control.q_star >= 0.0 && cfg.control.q_star <= 1.0))
        throw ConfigError("qstar must lie in [0,1]");
    if (!(cfg.q_low >= 0.0 && cfg.q_low <= cfg.q_high && cfg.q_high <= 1.0))
        throw ConfigError("proclivity range must satisfy 0 <= q_low <= q_high <= 1");
    if (cfg.scaling) {
        try {
            derive_gains(*cfg.scaling);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } else {
        if (!(cfg.control.alpha > 0.0)) throw ConfigError("alpha must be > 0");
        if (!(cfg.control.beta > 0.0)) throw ConfigError("beta must be > 0");
        if (!(cfg.control.gamma >= 0.0 && cfg.control.gamma < 1.0))
            throw ConfigError("gamma must lie in [0,1)");
    }
    if (cfg.defectors) {
        if (!(cfg.defectors->fraction >= 0.0 && cfg.defectors->fraction < 1.0))
            throw ConfigError("defector_frac must lie in [0,1)");
        if (cfg.defectors->defect_until < 0) throw ConfigError("defect_until must be >= 0");
    }
    if (!(cfg.mbar_init >= 0.0 && cfg.mbar_init <= 1.0))
        throw ConfigError("initial running average must lie in [0,1]");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

struct ConfigLine {
    std::string key;
    std::string value;
    long line_no = 0;
};

[[noreturn]] inline void fail_at(const ConfigLine& ln, const std::string& what) {
    throw ConfigError("config line " + std::to_string(ln.line_no) + ", key '" + ln.key +
                      "': " + what);
}

inline double parse_real(const ConfigLine& ln) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(ln.value, &pos);
        if (pos != ln.value.size()) fail_at(ln, "trailing characters after number");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail_at(ln, "expected a real number, got '" + ln.value + "'");
    }
}

inline long long parse_int(const ConfigLine& ln) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(ln.value, &pos);
        if (pos != ln.value.size()) fail_at(ln, "trailing characters after integer");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail_at(ln, "expected an integer, got '" + ln.value + "'");
    }
}

inline std::uint64_t parse_u64(const ConfigLine& ln) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(ln.value, &pos);
        if (pos != ln.value.size()) fail_at(ln, "trailing characters after integer");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail_at(ln, "expected a non-negative integer, got '" + ln.value + "'");
    }
}

inline bool parse_bool(const ConfigLine& ln) {
    if (ln.value == "true" || ln.value == "1") return true;
    if (ln.value == "false" || ln.value == "0") return false;
    fail_at(ln, "expected true/false/1/0, got '" + ln.value + "'");
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline SimConfig parse_config(std::string_view text) {
    using detail::ConfigLine;
    std::vector<ConfigLine> lines;
    long line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = text.find('\n', start);
        std::string_view raw = text.substr(
            start, end == std::string_view::npos ? std::string_view::npos : end - start);
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string_view::npos)
            raw = raw.substr(0, hash);
        raw = detail::trim(raw);
        if (raw.empty()) continue;
        const auto eq = raw.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        ConfigLine ln;
        ln.key = std::string(detail::trim(raw.substr(0, eq)));
        ln.value = std::string(detail::trim(raw.substr(eq + 1)));
        ln.line_no = line_no;
        if (ln.key.empty()) detail::fail_at(ln, "empty key");
        if (ln.value.empty()) detail::fail_at(ln, "empty value");
        for (const ConfigLine& seen : lines)
            if (seen.key == ln.key)
                detail::fail_at(ln, "duplicate key (first at line " +
                                        std::to_string(seen.line_no) + ")");
        lines.push_back(std::move(ln));
    }

    static constexpr std::string_view kRawGainKeys[] = {"alpha", "beta", "gamma"};
    static constexpr std::string_view kScalingKeys[] = {"epsilon", "w", "alpha0", "beta0"};
    static constexpr std::string_view kKnownKeys[] = {
        "n",       "alpha",         "beta",         "gamma",      "qstar",
        "epsilon", "w",             "alpha0",       "beta0",      "q_low",
        "q_high",  "horizon",       "scenario",     "defector_frac",
        "defect_until", "policy",   "unit_scale",   "reps",       "seed",
        "record_diagnostics"};

    const ConfigLine* raw_gain_line = nullptr;
    const ConfigLine* scaling_line = nullptr;
    for (const ConfigLine& ln : lines) {
        bool known = false;
        for (std::string_view k : kKnownKeys) known = known || (ln.key == k);
        if (!known) detail::fail_at(ln, "unknown key");
        for (std::string_view k : kRawGainKeys)
            if (ln.key == k && !raw_gain_line) raw_gain_line = &ln;
        for (std::string_view k : kScalingKeys)
            if (ln.key == k && !scaling_line) scaling_line = &ln;
    }
    if (raw_gain_line && scaling_line)
        throw ConfigError("config lines " + std::to_string(raw_gain_line->line_no) + " and " +
                          std::to_string(scaling_line->line_no) +
                          ": raw gains (alpha/beta/gamma) and scaling parameters "
                          "(epsilon/w/alpha0/beta0) are mutually exclusive gain sources");

    SimConfig cfg;
    apply_scenario(cfg, ScenarioKind::Both);

    // The scenario preset applies first so explicit keys can refine it.
    for (const ConfigLine& ln : lines) {
        if (ln.key != "scenario") continue;
        const auto kind = scenario_from_tag(ln.value);
        if (!kind) detail::fail_at(ln, "expected one of I, II, III, IV");
        apply_scenario(cfg, *kind);
    }

    if (scaling_line) cfg.scaling = ScalingParams{};

    std::optional<double> defector_frac_kv;
    std::optional<long> defect_until_kv;
    for (const ConfigLine& ln : lines) {
        if (ln.key == "scenario") continue;
        if (ln.key == "n") cfg.n = static_cast<int>(detail::parse_int(ln));
        else if (ln.key == "alpha") cfg.control.alpha = detail::parse_real(ln);
        else if (ln.key == "beta") cfg.control.beta = detail::parse_real(ln);
        else if (ln.key == "gamma") cfg.control.gamma = detail::parse_real(ln);
        else if (ln.key == "qstar") cfg.control.q_star = detail::parse_real(ln);
        else if (ln.key == "epsilon") cfg.scaling->epsilon = detail::parse_real(ln);
        else if (ln.key == "w") cfg.scaling->w = detail::parse_real(ln);
        else if (ln.key == "alpha0") cfg.scaling->alpha0 = detail::parse_real(ln);
        else if (ln.key == "beta0") cfg.scaling->beta0 = detail::parse_real(ln);
        else if (ln.key == "q_low") cfg.q_low = detail::parse_real(ln);
        else if (ln.key == "q_high") cfg.q_high = detail::parse_real(ln);
        else if (ln.key == "horizon") cfg.horizon = detail::parse_int(ln);
        else if (ln.key == "defector_frac") defector_frac_kv = detail::parse_real(ln);
        else if (ln.key == "defect_until") defect_until_kv = detail::parse_int(ln);
        else if (ln.key == "policy") {
            const auto p = policy_from_tag(ln.value);
            if (!p) detail::fail_at(ln, "expected one of fixed, adaptive, event");
            cfg.policy = *p;
        } else if (ln.key == "unit_scale") cfg.unit_scale = detail::parse_u64(ln);
        else if (ln.key == "reps") cfg.reps = static_cast<int>(detail::parse_int(ln));
        else if (ln.key == "seed") cfg.base_seed = detail::parse_u64(ln);
        else if (ln.key == "record_diagnostics") cfg.record_diagnostics = detail::parse_bool(ln);
    }

    if (defector_frac_kv || defect_until_kv) {
        if (!cfg.defectors) cfg.defectors = DefectorConfig{};
        if (defector_frac_kv) cfg.defectors->fraction = *defector_frac_kv;
        if (defect_until_kv) cfg.defectors->defect_until = *defect_until_kv;
        if (cfg.defectors->fraction == 0.0) cfg.defectors.reset();
    }

    try {
        validate_config(cfg);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

// Canonical text form; parse(serialize(cfg)) reproduces every
// file-representable field, so serialize . parse . serialize is the identity.
inline std::string serialize_config(const SimConfig& cfg) {
    std::string out;
    auto kv = [&out](std::string_view k, const std::string& v) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    };
    kv("n", std::to_string(cfg.n));
    kv("scenario", scenario_tag(cfg.scenario));
    if (cfg.scaling) {
        kv("epsilon", detail::format_real(cfg.scaling->epsilon));
        kv("w", detail::format_real(cfg.scaling->w));
        kv("alpha0", detail::format_real(cfg.scaling->alpha0));
        kv("beta0", detail::format_real(cfg.scaling->beta0));
    } else {
        kv("alpha", detail::format_real(cfg.control.alpha));
        kv("beta", detail::format_real(cfg.control.beta));
        kv("gamma", detail::format_real(cfg.control.gamma));
    }
    kv("qstar", detail::format_real(cfg.control.q_star));
    kv("q_low", detail::format_real(cfg.q_low));
    kv("q_high", detail::format_real(cfg.q_high));
    kv("horizon", std::to_string(cfg.horizon));
    if (cfg.defectors) {
        kv("defector_frac", detail::format_real(cfg.defectors->fraction));
        kv("defect_until", std::to_string(cfg.defectors->defect_until));
    }
    kv("policy", policy_tag(cfg.policy));
    kv("unit_scale", std::to_string(cfg.unit_scale));
    kv("reps", std::to_string(cfg.reps));
    kv("seed", std::to_string(cfg.base_seed));
    kv("record_diagnostics", cfg.record_diagnostics ? "true" : "false");
    return out;
}

}  // namespace clab

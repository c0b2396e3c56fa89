#pragma once

// Closed-loop compliance model: n stochastic agents, one global price signal
// and one personal price signal per agent, both driven by proportional
// controllers toward a target compliance level.
//
// State and one step of the loop, for agent i at time k:
//
//   probability of complying:  p(q_i + C(k) + c_i(k)),  p = mid{0,1,x}
//   draw:                      M_i(k+1) ~ Bernoulli(p(...)), independent
//   running average:           Mbar_i(k+1) = gamma*Mbar_i(k) + (1-gamma)*M_i(k+1)
//   global signal:             C(k+1) = C(k) + alpha*(Qstar - mean_i M_i(k))
//   personal signal:           c_i(k+1) = c_i(k) + beta*(Qstar - Mbar_i(k))
//
// ORDERING INVARIANT (do not reorder): within step_ensemble the new signals
// are computed from the draws/averages of step k, and the step-(k+1) draws use
// the step-k signals. Any other order defines a different stochastic process.
//
// Signals are unclamped reals; only the probability is clamped. A defecting
// agent's draw is forced to 0 while its signals keep evolving by the same
// formulas, and its draw still consumes one RNG variate so that defector and
// non-defector runs stay stream-aligned.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "compliance_lab/rng.hpp"

namespace clab {

struct AgentParams {
    int id = 0;
    double q = 0.0;  // base proclivity to comply, additive offset in the probability
};

struct AgentState {
    double c = 0.0;        // personal price signal c_i(k)
    double m_bar = 0.0;    // running compliance average Mbar_i(k), in [0,1]
    int last_m = 0;        // most recent draw M_i(k), 0 or 1
    bool defecting = false;
};

struct GlobalSignal {
    double c_global = 0.0;  // C(k)
};

struct ControlConfig {
    double alpha = 0.025;  // global gain, > 0
    double beta = 0.1;     // personal gain, > 0
    double gamma = 0.95;   // averaging factor, in [0,1); window length ~ 1/(1-gamma)
    double q_star = 0.85;  // target compliance level, in [0,1]
    bool enable_global = true;
    bool enable_individual = true;
};

// Small-step parameterization: gains expressed through a step size epsilon and
// a window-rate w. derive_gains() maps these onto ControlConfig.
struct ScalingParams {
    double epsilon = 0.04;
    double w = 1.0;
    double alpha0 = 1.0;
    double beta0 = 1.0;  // must lie in (0,1] for the concentration regime
};

struct EnsembleState {
    long step = 0;
    GlobalSignal global;
    std::vector<AgentParams> params;  // indexed by agent id
    std::vector<AgentState> states;   // parallel to params

    int n() const { return static_cast<int>(params.size()); }
};

// p(x) = mid{0,1,x}. Rejects non-finite input.
inline double clamp_probability(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("clamp_probability: non-finite input");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x;
}

inline double compliance_probability(const AgentParams& p, const AgentState& s,
                                     const GlobalSignal& g) {
    if (s.defecting) return 0.0;
    return clamp_probability(p.q + g.c_global + s.c);
}

// One Bernoulli draw; consumes exactly one engine variate.
inline int draw_compliance(rng::Engine& eng, double prob) {
    return rng::unit_uniform(eng) < prob ? 1 : 0;
}

inline double ema_update(double m_bar, int m_new, double gamma) {
    return gamma * m_bar + (1.0 - gamma) * static_cast<double>(m_new);
}

inline double global_update(double c_global, double mean_m, double alpha, double q_star) {
    return c_global + alpha * (q_star - mean_m);
}

inline double individual_update(double c, double m_bar, double beta, double q_star) {
    return c + beta * (q_star - m_bar);
}

// alpha = eps^{3/2} alpha0,  beta = eps beta0 w,  gamma = 1 - eps w.
// Enforces beta0 in (0,1] and eps*w < 1 (gamma must land in [0,1)).
inline ControlConfig derive_gains(const ScalingParams& s) {
    if (!(s.epsilon > 0.0)) throw std::invalid_argument("derive_gains: epsilon must be > 0");
    if (!(s.w > 0.0)) throw std::invalid_argument("derive_gains: w must be > 0");
    if (!(s.alpha0 > 0.0)) throw std::invalid_argument("derive_gains: alpha0 must be > 0");
    if (!(s.beta0 > 0.0 && s.beta0 <= 1.0))
        throw std::invalid_argument("derive_gains: beta0 must lie in (0,1]");
    if (!(s.epsilon * s.w < 1.0))
        throw std::invalid_argument("derive_gains: epsilon*w must be < 1");
    ControlConfig cfg;
    cfg.alpha = std::pow(s.epsilon, 1.5) * s.alpha0;
    cfg.beta = s.epsilon * s.beta0 * s.w;
    cfg.gamma = 1.0 - s.epsilon * s.w;
    return cfg;
}

// Mean of the step-k draws, summed in ascending id order. The ledger replay
// recomputes this with the same function so the two paths agree bit-for-bit.
inline double mean_last_m(const std::vector<AgentState>& states) {
    double sum = 0.0;
    for (const AgentState& s : states) sum += static_cast<double>(s.last_m);
    return sum / static_cast<double>(states.size());
}

// One closed-loop step. Draw order over agents is ascending id.
inline void step_ensemble(EnsembleState& st, const ControlConfig& cfg, rng::Engine& eng) {
    const double old_c_global = st.global.c_global;
    const double new_c_global =
        cfg.enable_global
            ? global_update(old_c_global, mean_last_m(st.states), cfg.alpha, cfg.q_star)
            : old_c_global;

    for (int i = 0; i < st.n(); ++i) {
        AgentState& s = st.states[i];
        const double old_c = s.c;
        const double new_c = cfg.enable_individual
                                 ? individual_update(old_c, s.m_bar, cfg.beta, cfg.q_star)
                                 : old_c;
        const double prob =
            s.defecting ? 0.0 : clamp_probability(st.params[i].q + old_c_global + old_c);
        const int m = draw_compliance(eng, prob);
        s.m_bar = ema_update(s.m_bar, m, cfg.gamma);
        s.last_m = m;
        s.c = new_c;
    }
    st.global.c_global = new_c_global;
    st.step += 1;
}

}  // namespace clab

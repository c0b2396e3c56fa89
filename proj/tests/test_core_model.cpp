#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "compliance_lab/core_model.hpp"
#include "compliance_lab/rng.hpp"

using namespace clab;

TEST_CASE("clamp_probability matches mid{0,1,x}") {
    CHECK(clamp_probability(0.3) == 0.3);
    CHECK(clamp_probability(-0.2) == 0.0);
    CHECK(clamp_probability(1.7) == 1.0);
    CHECK(clamp_probability(0.0) == 0.0);
    CHECK(clamp_probability(1.0) == 1.0);
}

TEST_CASE("clamp_probability rejects non-finite input") {
    CHECK_THROWS_AS(clamp_probability(std::numeric_limits<double>::quiet_NaN()),
                    std::invalid_argument);
    CHECK_THROWS_AS(clamp_probability(std::numeric_limits<double>::infinity()),
                    std::invalid_argument);
}

TEST_CASE("clamp_probability is idempotent and monotone") {
    rng::Engine eng(99);
    double prev_x = -5.0, prev_p = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double x = prev_x + 0.01 + rng::unit_uniform(eng) * 0.01;
        const double p = clamp_probability(x);
        CHECK(clamp_probability(p) == p);
        CHECK(p >= prev_p);  // non-decreasing along increasing x
        prev_x = x;
        prev_p = p;
    }
}

TEST_CASE("compliance_probability adds the three components and clamps") {
    AgentParams ap{0, 0.2};
    AgentState st;
    GlobalSignal g;

    st.c = 0.1;
    g.c_global = 0.3;
    CHECK(compliance_probability(ap, st, g) == Catch::Approx(0.6).margin(1e-15));

    st.c = 0.0;
    g.c_global = -1.0;
    CHECK(compliance_probability(ap, st, g) == 0.0);

    AgentParams high{0, 0.35};
    AgentState defector;
    defector.defecting = true;
    GlobalSignal zero;
    CHECK(compliance_probability(high, defector, zero) == 0.0);
}

TEST_CASE("draw_compliance is degenerate at the endpoints") {
    rng::Engine eng(7);
    for (int i = 0; i < 1000; ++i) CHECK(draw_compliance(eng, 1.0) == 1);
    for (int i = 0; i < 1000; ++i) CHECK(draw_compliance(eng, 0.0) == 0);
}

TEST_CASE("draw_compliance consumes exactly one variate") {
    rng::Engine a(123), b(123);
    draw_compliance(a, 0.37);
    b.discard(1);
    CHECK(a == b);
}

TEST_CASE("draw_compliance sample mean approaches the probability") {
    rng::Engine eng(2024);
    const int n = 100000;
    long ones = 0;
    for (int i = 0; i < n; ++i) ones += draw_compliance(eng, 0.5);
    CHECK(std::abs(static_cast<double>(ones) / n - 0.5) < 0.01);
}

TEST_CASE("ema_update fixed points and arithmetic") {
    CHECK(ema_update(1.0, 1, 0.95) == 1.0);
    CHECK(ema_update(0.0, 0, 0.95) == 0.0);
    CHECK(ema_update(0.8, 1, 0.95) == Catch::Approx(0.81).margin(1e-15));
}

TEST_CASE("ema_update stays in [0,1]") {
    rng::Engine eng(5);
    for (int i = 0; i < 2000; ++i) {
        const double m_bar = rng::unit_uniform(eng);
        const double gamma = rng::unit_uniform(eng) * 0.999;
        const int m = rng::unit_uniform(eng) < 0.5 ? 0 : 1;
        const double next = ema_update(m_bar, m, gamma);
        CHECK(next >= 0.0);
        CHECK(next <= 1.0);
    }
}

TEST_CASE("ema recursion reproduces the windowed-sum closed form") {
    const double gamma = 0.95;
    rng::Engine eng(11);
    std::vector<int> draws(100);
    for (int& m : draws) m = rng::unit_uniform(eng) < 0.6 ? 1 : 0;

    double m_bar = 0.0;  // empty average at k=0
    for (int m : draws) m_bar = ema_update(m_bar, m, gamma);

    // (1-gamma) * sum_{j=1..k} gamma^{k-j} M(j), computed independently.
    const int k = static_cast<int>(draws.size());
    double closed = 0.0;
    for (int j = 1; j <= k; ++j)
        closed += std::pow(gamma, k - j) * draws[static_cast<std::size_t>(j - 1)];
    closed *= 1.0 - gamma;

    CHECK(std::abs(m_bar - closed) <= 1e-12);
}

TEST_CASE("global_update arithmetic") {
    CHECK(global_update(0.0, 0.85, 0.025, 0.85) == 0.0);
    CHECK(global_update(0.0, 0.75, 0.025, 0.85) == Catch::Approx(0.0025).margin(1e-18));
    CHECK(global_update(0.5, 1.0, 0.025, 0.85) == Catch::Approx(0.49625).margin(1e-15));
}

TEST_CASE("individual_update arithmetic") {
    CHECK(individual_update(0.0, 0.85, 0.1, 0.85) == 0.0);
    CHECK(individual_update(0.0, 0.0, 0.1, 0.85) == Catch::Approx(0.085).margin(1e-18));
    CHECK(individual_update(-0.2, 1.0, 0.1, 0.85) == Catch::Approx(-0.215).margin(1e-15));
}

TEST_CASE("derive_gains maps the scaled parameterization") {
    const ControlConfig cfg = derive_gains({0.04, 1.0, 1.0, 1.0});
    CHECK(cfg.alpha == Catch::Approx(0.008).margin(1e-15));
    CHECK(cfg.beta == Catch::Approx(0.04).margin(1e-15));
    CHECK(cfg.gamma == Catch::Approx(0.96).margin(1e-15));
}

TEST_CASE("derive_gains rejects degenerate parameters") {
    CHECK_THROWS_AS(derive_gains({0.0, 1.0, 1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(derive_gains({0.05, 1.0, 1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(derive_gains({0.5, 2.0, 1.0, 1.0}), std::invalid_argument);  // eps*w >= 1
    CHECK_THROWS_AS(derive_gains({0.04, -1.0, 1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(derive_gains({0.04, 1.0, 0.0, 1.0}), std::invalid_argument);
}

namespace {

EnsembleState single_agent_state(double q, double c, double m_bar, int last_m) {
    EnsembleState st;
    st.params = {{0, q}};
    AgentState s;
    s.c = c;
    s.m_bar = m_bar;
    s.last_m = last_m;
    st.states = {s};
    return st;
}

}  // namespace

TEST_CASE("step_ensemble hand trace") {
    // q=0.2, C=0, c=0, M(k)=1, Mbar(k)=0.5 with the standard gains.
    EnsembleState st = single_agent_state(0.2, 0.0, 0.5, 1);
    ControlConfig cfg;  // alpha=0.025, beta=0.1, gamma=0.95, qstar=0.85

    rng::Engine eng(42);
    rng::Engine probe(42);
    const double u = rng::unit_uniform(probe);  // the variate the draw will consume

    step_ensemble(st, cfg, eng);

    CHECK(st.global.c_global == Catch::Approx(0.025 * (0.85 - 1.0)).margin(1e-18));
    CHECK(st.states[0].c == Catch::Approx(0.1 * (0.85 - 0.5)).margin(1e-18));
    // The draw used the old signals: probability p(0.2 + 0 + 0) = 0.2.
    CHECK(st.states[0].last_m == (u < 0.2 ? 1 : 0));
    CHECK(st.states[0].m_bar ==
          Catch::Approx(ema_update(0.5, st.states[0].last_m, 0.95)).margin(1e-18));
    CHECK(st.step == 1);
}

TEST_CASE("step_ensemble saturated target is a fixed point") {
    // q=2 clamps the probability to 1; with Qstar=1, Mbar=1 and M=1 nothing moves.
    EnsembleState st = single_agent_state(2.0, 0.0, 1.0, 1);
    ControlConfig cfg;
    cfg.q_star = 1.0;

    rng::Engine eng(3);
    for (int k = 0; k < 50; ++k) {
        step_ensemble(st, cfg, eng);
        CHECK(st.global.c_global == 0.0);
        CHECK(st.states[0].c == 0.0);
        CHECK(st.states[0].last_m == 1);
        CHECK(st.states[0].m_bar == 1.0);
    }
}

TEST_CASE("step_ensemble equilibrium of the controller") {
    // Mean draw = Qstar and every running average = Qstar leave signals fixed.
    EnsembleState st;
    st.params = {{0, 0.2}, {1, 0.3}};
    AgentState a;
    a.m_bar = 0.5;
    a.last_m = 0;
    AgentState b;
    b.m_bar = 0.5;
    b.last_m = 1;
    st.states = {a, b};
    st.global.c_global = 0.25;
    st.states[0].c = -0.1;
    st.states[1].c = 0.4;

    ControlConfig cfg;
    cfg.q_star = 0.5;  // mean of {0,1}

    rng::Engine eng(17);
    step_ensemble(st, cfg, eng);
    CHECK(st.global.c_global == 0.25);
    CHECK(st.states[0].c == -0.1);
    CHECK(st.states[1].c == 0.4);
}

TEST_CASE("defector draw is forced to zero while signals keep evolving") {
    EnsembleState st = single_agent_state(0.9, 0.2, 0.4, 1);
    st.states[0].defecting = true;
    ControlConfig cfg;

    rng::Engine eng(5), before(5);
    step_ensemble(st, cfg, eng);

    CHECK(st.states[0].last_m == 0);
    CHECK(st.states[0].m_bar == Catch::Approx(0.95 * 0.4).margin(1e-18));
    CHECK(st.states[0].c == Catch::Approx(0.2 + 0.1 * (0.85 - 0.4)).margin(1e-18));
    // The forced draw still consumed one variate.
    before.discard(1);
    CHECK(eng == before);
}

TEST_CASE("disabled loops leave their signals untouched") {
    ControlConfig cfg;
    cfg.enable_global = false;
    cfg.enable_individual = false;

    EnsembleState st = single_agent_state(0.2, 0.3, 0.1, 0);
    st.global.c_global = -0.2;
    rng::Engine eng(9);
    for (int k = 0; k < 20; ++k) step_ensemble(st, cfg, eng);
    CHECK(st.global.c_global == -0.2);
    CHECK(st.states[0].c == 0.3);
}

TEST_CASE("identical seeds give bit-identical trajectories") {
    auto make = [] {
        EnsembleState st;
        for (int i = 0; i < 8; ++i) {
            st.params.push_back({i, 0.1 + 0.03 * i});
            st.states.push_back({0.0, 0.0, 0, false});
        }
        return st;
    };
    EnsembleState a = make(), b = make();
    ControlConfig cfg;
    rng::Engine ea(77), eb(77);
    for (int k = 0; k < 200; ++k) {
        step_ensemble(a, cfg, ea);
        step_ensemble(b, cfg, eb);
        REQUIRE(a.global.c_global == b.global.c_global);
        for (int i = 0; i < a.n(); ++i) {
            REQUIRE(a.states[static_cast<std::size_t>(i)].c ==
                    b.states[static_cast<std::size_t>(i)].c);
            REQUIRE(a.states[static_cast<std::size_t>(i)].m_bar ==
                    b.states[static_cast<std::size_t>(i)].m_bar);
            REQUIRE(a.states[static_cast<std::size_t>(i)].last_m ==
                    b.states[static_cast<std::size_t>(i)].last_m);
        }
    }
}

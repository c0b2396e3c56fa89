#pragma once

// Deterministic companions of the stochastic loop, used as numerical oracles:
// the Euler-style discrete map y <- y + eps*h(y), the ODE dz/dt = h(z), a
// Lyapunov function for the flow, the closed-form excursion solution in the
// region z2 >= 1, and the linear-stability eigenvalues at the fixed point
// y* = (Qstar, Qstar).
//
// Coordinates: y1 is the compliance average, y2 the total signal q + C + c.
//
//   h1(y) = w * (p(y2) - y1)
//   h2(y) = beta0 * w * (Qstar - y1)
//
// The field is piecewise linear (kinks at y2 = 0 and y2 = 1) and globally
// Lipschitz, so fixed-step RK4 with dt <= 0.01/w is accurate enough for every
// check here; boundary crossings are not event-located.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "compliance_lab/core_model.hpp"

namespace clab {

struct RefPoint {
    double y1 = 0.0;
    double y2 = 0.0;
};

struct RefParams {
    double w = 1.0;
    double beta0 = 1.0;    // in (0,1]
    double q_star = 0.85;  // in [0,1]
    double epsilon = 0.01; // discrete map only
};

inline std::array<double, 2> vector_field_h(const RefPoint& y, const RefParams& p) {
    return {p.w * (clamp_probability(y.y2) - y.y1), p.beta0 * p.w * (p.q_star - y.y1)};
}

inline RefPoint fixed_point(const RefParams& p) { return {p.q_star, p.q_star}; }

inline double distance_to_fixed_point(const RefPoint& y, const RefParams& p) {
    return std::hypot(y.y1 - p.q_star, y.y2 - p.q_star);
}

inline RefPoint discrete_step(const RefPoint& y, const RefParams& p) {
    const auto h = vector_field_h(y, p);
    return {y.y1 + p.epsilon * h[0], y.y2 + p.epsilon * h[1]};
}

// y(k+1) = y(k) + eps*h(y(k)); returns the full trajectory, steps+1 points.
inline std::vector<RefPoint> discrete_iterate(const RefPoint& y0, const RefParams& p,
                                              long steps) {
    if (steps < 0) throw std::invalid_argument("discrete_iterate: steps must be >= 0");
    std::vector<RefPoint> traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);
    traj.push_back(y0);
    RefPoint y = y0;
    for (long k = 0; k < steps; ++k) {
        y = discrete_step(y, p);
        traj.push_back(y);
    }
    return traj;
}

inline RefPoint rk4_step(const RefPoint& z, const RefParams& p, double dt) {
    const auto k1 = vector_field_h(z, p);
    const auto k2 = vector_field_h({z.y1 + 0.5 * dt * k1[0], z.y2 + 0.5 * dt * k1[1]}, p);
    const auto k3 = vector_field_h({z.y1 + 0.5 * dt * k2[0], z.y2 + 0.5 * dt * k2[1]}, p);
    const auto k4 = vector_field_h({z.y1 + dt * k3[0], z.y2 + dt * k3[1]}, p);
    return {z.y1 + dt / 6.0 * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
            z.y2 + dt / 6.0 * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1])};
}

struct OdeTrajectory {
    double dt = 0.0;
    std::vector<RefPoint> points;  // points[j] is the state at t = j*dt

    double time_at(std::size_t j) const { return static_cast<double>(j) * dt; }
};

// Classical RK4 with a fixed step. dt = 0 picks the default min(0.01/w, 0.01).
inline OdeTrajectory ode_integrate(const RefPoint& z0, const RefParams& p, double T,
                                   double dt = 0.0) {
    if (!(T >= 0.0)) throw std::invalid_argument("ode_integrate: T must be >= 0");
    if (dt == 0.0) dt = std::min(0.01 / p.w, 0.01);
    if (!(dt > 0.0 && dt <= 0.01 / p.w + 1e-12))
        throw std::invalid_argument("ode_integrate: need 0 < dt <= 0.01/w");
    const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    OdeTrajectory traj;
    traj.dt = dt;
    traj.points.reserve(steps + 1);
    traj.points.push_back(z0);
    RefPoint z = z0;
    for (std::size_t j = 0; j < steps; ++j) {
        z = rk4_step(z, p, dt);
        traj.points.push_back(z);
    }
    return traj;
}

// Closed-form z2(t) while the trajectory stays in the region z2 >= 1, where
// the field is linear and z1(t) = 1 - (1 - z1(0)) e^{-wt}:
//   z2(t) = z2(0) - beta0*w*t*(1 - Qstar) + beta0*(1 - z1(0))*(1 - e^{-wt})
inline double region_excursion_solution(double z2_0, double z1_0, const RefParams& p,
                                        double t) {
    return z2_0 - p.beta0 * p.w * t * (1.0 - p.q_star) +
           p.beta0 * (1.0 - z1_0) * (1.0 - std::exp(-p.w * t));
}

// V(z) = beta0 (z1 - Qstar)^2 + (z2 - Qstar)^2; inside [0,1]^2 its derivative
// along the flow is -2 beta0 w (z1 - Qstar)^2 <= 0.
inline double lyapunov_value(const RefPoint& z, const RefParams& p) {
    const double d1 = z.y1 - p.q_star;
    const double d2 = z.y2 - p.q_star;
    return p.beta0 * d1 * d1 + d2 * d2;
}

// Eigenvalues of A = [[-1, 1], [-beta0, 0]], the Jacobian of h/w inside the
// square: roots of lambda^2 + lambda + beta0 = 0. Both real parts are
// strictly negative for beta0 in (0,1].
inline std::array<std::complex<double>, 2> stability_eigenvalues(const RefParams& p) {
    if (!(p.beta0 > 0.0)) throw std::invalid_argument("stability_eigenvalues: beta0 must be > 0");
    const std::complex<double> disc(1.0 - 4.0 * p.beta0, 0.0);
    const std::complex<double> root = std::sqrt(disc);
    return {(-1.0 + root) / 2.0, (-1.0 - root) / 2.0};
}

struct ContractionProbeResult {
    double tau = 0.0;  // smallest horizon (in slow time) with the halving property
    double b1 = 0.0;   // fitted additive constant: dist(tau/eps) <= dist(0)/2 + b1*eps
};

// Searches a geometric grid of horizons tau for the smallest one such that
// iterating the discrete map for tau/eps steps at least halves the distance to
// the fixed point, up to an additive b1*eps or better, uniformly over the
// start grid and every epsilon in eps_list. Throws if no tau below tau_cap
// works with b1 <= b1_cap.
inline ContractionProbeResult contraction_probe(const RefParams& base,
                                                const std::vector<double>& eps_list,
                                                const std::vector<RefPoint>& start_grid,
                                                double tau_cap = 64.0, double b1_cap = 25.0) {
    if (eps_list.empty() || start_grid.empty())
        throw std::invalid_argument("contraction_probe: empty eps list or start grid");
    for (double tau = 0.5; tau <= tau_cap; tau *= 2.0) {
        double worst_excess_over_eps = 0.0;
        bool ok = true;
        for (double eps : eps_list) {
            RefParams p = base;
            p.epsilon = eps;
            const long steps = static_cast<long>(std::llround(tau / eps));
            for (const RefPoint& y0 : start_grid) {
                RefPoint y = y0;
                for (long k = 0; k < steps; ++k) y = discrete_step(y, p);
                const double excess =
                    distance_to_fixed_point(y, p) - 0.5 * distance_to_fixed_point(y0, p);
                worst_excess_over_eps = std::max(worst_excess_over_eps, excess / eps);
                if (excess / eps > b1_cap) {
                    ok = false;
                    break;
                }
            }
            if (!ok) break;
        }
        if (ok) return {tau, std::max(0.0, worst_excess_over_eps)};
    }
    throw std::runtime_error("contraction_probe: no horizon below tau_cap satisfies the "
                             "halving property within b1_cap");
}

}  // namespace clab

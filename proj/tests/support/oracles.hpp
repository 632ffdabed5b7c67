#pragma once

// Test-only oracles. Each one is an independent route to a quantity the
// library computes in closed form, so the two can be checked against each
// other without sharing code paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "habit/model.hpp"
#include "habit/philox.hpp"

namespace oracles {

/// Geometric grid on (0, cap] spanning `decades` decades, largest point = cap.
inline std::vector<double> geometric_grid(double cap, std::size_t n, double decades = 6.0) {
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i)
        c[i] = cap * std::pow(10.0, -decades * (1.0 - double(i + 1) / double(n)));
    return c;
}

/// Brute-force maximum of the consumption Hamiltonian over a geometric c-grid.
/// Uses the algebraic form g(c) = -c d - A c^(1-sigma)/(sigma-1) with
/// A = h^(gamma(sigma-1)); `spot_check_g` verifies the form against
/// hamiltonian_g at a few grid points so the fast path stays honest.
struct BruteForceResult {
    double best_g = -std::numeric_limits<double>::infinity();
    double best_c = 0.0;
};

inline BruteForceResult brute_force_max_g(const habit::State& s, double p_k, double p_h,
                                          const habit::ModelParams& p,
                                          const std::vector<double>& unit_grid,
                                          const std::vector<double>& unit_pow) {
    const double cap = p.R * s.k;
    const double d = p_k - p.rho * p_h;
    const double a = std::pow(s.h, p.habit_power()) * std::pow(cap, 1.0 - p.sigma) /
                     (p.sigma - 1.0);
    BruteForceResult out;
    for (std::size_t i = 0; i < unit_grid.size(); ++i) {
        const double g = -cap * unit_grid[i] * d - a * unit_pow[i];
        if (g > out.best_g) {
            out.best_g = g;
            out.best_c = cap * unit_grid[i];
        }
    }
    return out;
}

inline bool spot_check_g(const habit::State& s, double p_k, double p_h,
                         const habit::ModelParams& p, const std::vector<double>& unit_grid,
                         const std::vector<double>& unit_pow, std::size_t stride) {
    const double cap = p.R * s.k;
    const double d = p_k - p.rho * p_h;
    const double a = std::pow(s.h, p.habit_power()) * std::pow(cap, 1.0 - p.sigma) /
                     (p.sigma - 1.0);
    for (std::size_t i = 0; i < unit_grid.size(); i += stride) {
        const double fast = -cap * unit_grid[i] * d - a * unit_pow[i];
        const double exact = habit::hamiltonian_g(cap * unit_grid[i], s, p_k, p_h, p);
        if (std::fabs(fast - exact) > 1e-10 * (1.0 + std::fabs(exact))) return false;
    }
    return true;
}

/// Classic fourth-order Runge-Kutta for the noise-free closed-loop system
/// dk = (B k - c(t,k,h)) dt, dh = rho (c - h) dt.
inline std::pair<double, double> rk4_closed_loop(
    double k0, double h0, const std::function<double(double, double, double)>& c,
    double t_end, std::size_t n_steps, const habit::ModelParams& p) {
    double k = k0, h = h0;
    const double dt = t_end / double(n_steps);
    auto fk = [&](double t, double kk, double hh) { return p.B * kk - c(t, kk, hh); };
    auto fh = [&](double t, double kk, double hh) { return p.rho * (c(t, kk, hh) - hh); };
    for (std::size_t s = 0; s < n_steps; ++s) {
        const double t = dt * double(s);
        const double k1 = fk(t, k, h), l1 = fh(t, k, h);
        const double k2 = fk(t + dt / 2, k + dt / 2 * k1, h + dt / 2 * l1);
        const double l2 = fh(t + dt / 2, k + dt / 2 * k1, h + dt / 2 * l1);
        const double k3 = fk(t + dt / 2, k + dt / 2 * k2, h + dt / 2 * l2);
        const double l3 = fh(t + dt / 2, k + dt / 2 * k2, h + dt / 2 * l2);
        const double k4 = fk(t + dt, k + dt * k3, h + dt * l3);
        const double l4 = fh(t + dt, k + dt * k3, h + dt * l3);
        k += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        h += dt / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
    }
    return {k, h};
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    LineFit f;
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    const double den = (n * sxx - sx * sx) * (n * syy - sy * sy);
    f.r_squared = den > 0 ? (n * sxy - sx * sy) * (n * sxy - sx * sy) / den : 0.0;
    return f;
}

/// Deterministic uniform draw in [lo, hi) from the project's counter-based
/// generator; (stream, index) address the sample.
inline double u(std::uint64_t stream, std::uint64_t index, double lo, double hi) {
    return lo + (hi - lo) * habit::uniform01(stream, index, 0);
}

} // namespace oracles

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "habit/model.hpp"

namespace habit {

/// Uniform grid on [0, t_end] with n_steps intervals (n_steps + 1 nodes).
struct TimeGrid {
    double t_end = 1.0;
    std::size_t n_steps = 1000;

    double dt() const { return t_end / double(n_steps); }
    std::size_t size() const { return n_steps + 1; }
    double time(std::size_t i) const { return t_end * double(i) / double(n_steps); }
};

/// Sampled paths of the two independent Brownian motions. Increments are
/// generated by the counter-based generator keyed on (seed, path_index, step),
/// so identical keys reproduce bit-identical paths under any scheduling.
struct BrownianPair {
    TimeGrid grid;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    std::vector<double> w1;
    std::vector<double> w2;
};

BrownianPair make_brownian_pair(const TimeGrid& grid, std::uint64_t seed,
                                std::uint64_t path_index);

enum class ControlTag { constant_rate, lower_bound_strategy, feedback, user };

struct ControlPath {
    std::vector<double> c;
    ControlTag tag = ControlTag::user;
};

struct PathBundle {
    TimeGrid grid;
    BrownianPair noise;
    ControlPath control;
    std::vector<double> k;
    std::vector<double> h;
};

/// Doleans-Dade exponential of a*t + b*W on the grid nodes:
/// exp((a - b^2/2) t + b W_t). Strictly positive.
std::vector<double> stochastic_exponential(double drift, double vol,
                                           const std::vector<double>& w,
                                           const TimeGrid& grid);

/// k_t = E(B t + beta1 W1)_t * (k0 - int_0^t c_s / E(B s + beta1 W1)_s ds),
/// with the inner integral by trapezoidal quadrature on the grid. The path may
/// cross zero; admissibility is checked separately.
std::vector<double> capital_path_exact(double k0, const ControlPath& control,
                                       const BrownianPair& noise, const TimeGrid& grid,
                                       const ModelParams& p);

/// h_t = E(-rho t + beta2 W2)_t * (h0 + rho int_0^t c_s / E(-rho s + beta2 W2)_s ds).
/// Strictly positive whenever c > 0.
std::vector<double> habit_path_exact(double h0, const ControlPath& control,
                                     const BrownianPair& noise, const TimeGrid& grid,
                                     const ModelParams& p);

enum class Constraint {
    none,
    capital_positive,
    habit_positive,
    consumption_positive,
    consumption_cap,
};

struct AdmissibilityReport {
    bool admissible = false;
    std::size_t first_violation = std::size_t(-1);  ///< earliest violating grid node
    Constraint violated = Constraint::none;
};

/// Node-wise check of k > 0, h > 0, c > 0 and c <= R*k. Sub-grid crossings
/// between nodes are accepted risk of the discretization.
AdmissibilityReport is_admissible(const PathBundle& bundle, const ModelParams& p);

struct ConstantRateControl {
    ControlPath path;
    bool feasible = false;   ///< both feasibility conditions hold
    double rate_margin = 0;  ///< nu/B, feasible requires < k0
    double cap_margin = 0;   ///< (R/nu)(k0 - nu/B), feasible requires > 1
};

/// c = nu * E(beta1 W1). When nu/B < k0 and (R/nu)(k0 - nu/B) > 1 the resulting
/// bundle is admissible for every noise realization. Throws for nu <= 0.
ConstantRateControl feasible_constant_rate_control(double k0, double nu,
                                                   const BrownianPair& noise,
                                                   const TimeGrid& grid,
                                                   const ModelParams& p);

/// c = B k0 E(beta1 W1); the induced capital satisfies k = c/B identically.
/// Throws for B = 0 (the construction divides by B); use
/// feasible_constant_rate_control there instead.
ControlPath lower_bound_strategy(double k0, const BrownianPair& noise,
                                 const TimeGrid& grid, const ModelParams& p);

/// E[|k_t|^p] <= k0^p exp{p (B + beta1^2 (p-1)/2) t}, valid for every
/// admissible control.
double capital_moment_bound(double p_order, double t, double k0, const ModelParams& p);

/// Assembles the exact state trajectories for a given control and noise draw.
PathBundle make_bundle(double k0, double h0, ControlPath control, BrownianPair noise,
                       const ModelParams& p);

/// CSV with header t,w1,w2,c,k,h; doubles in shortest round-trip form.
void write_path_csv(std::ostream& os, const PathBundle& bundle);

} // namespace habit

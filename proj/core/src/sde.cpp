#include "habit/sde.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "habit/csv.hpp"
#include "habit/philox.hpp"

namespace habit {

BrownianPair make_brownian_pair(const TimeGrid& grid, std::uint64_t seed,
                                std::uint64_t path_index) {
    BrownianPair bp;
    bp.grid = grid;
    bp.seed = seed;
    bp.path_index = path_index;
    bp.w1.resize(grid.size());
    bp.w2.resize(grid.size());
    bp.w1[0] = 0.0;
    bp.w2[0] = 0.0;
    const double sdt = std::sqrt(grid.dt());
    double a = 0.0, b = 0.0;
    for (std::size_t s = 0; s < grid.n_steps; ++s) {
        const NormalPair z = normal_pair(seed, path_index, s);
        a += sdt * z.z1;
        b += sdt * z.z2;
        bp.w1[s + 1] = a;
        bp.w2[s + 1] = b;
    }
    return bp;
}

std::vector<double> stochastic_exponential(double drift, double vol,
                                           const std::vector<double>& w,
                                           const TimeGrid& grid) {
    if (w.size() != grid.size())
        throw std::invalid_argument("stochastic_exponential: noise path does not match grid");
    std::vector<double> e(grid.size());
    const double a = drift - 0.5 * vol * vol;
    for (std::size_t i = 0; i < e.size(); ++i)
        e[i] = std::exp(a * grid.time(i) + vol * w[i]);
    return e;
}

namespace {

// trapezoidal running integral of f on the grid
std::vector<double> running_trapezoid(const std::vector<double>& f, double dt) {
    std::vector<double> acc(f.size());
    acc[0] = 0.0;
    double s = 0.0;
    for (std::size_t i = 1; i < f.size(); ++i) {
        s += 0.5 * dt * (f[i - 1] + f[i]);
        acc[i] = s;
    }
    return acc;
}

} // namespace

std::vector<double> capital_path_exact(double k0, const ControlPath& control,
                                       const BrownianPair& noise, const TimeGrid& grid,
                                       const ModelParams& p) {
    if (!(k0 > 0.0)) throw std::invalid_argument("capital_path_exact: k0 must be > 0");
    if (control.c.size() != grid.size())
        throw std::invalid_argument("capital_path_exact: control does not match grid");
    const auto e = stochastic_exponential(p.B, p.beta1, noise.w1, grid);
    std::vector<double> f(grid.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = control.c[i] / e[i];
    const auto acc = running_trapezoid(f, grid.dt());
    std::vector<double> k(grid.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = e[i] * (k0 - acc[i]);
    return k;
}

std::vector<double> habit_path_exact(double h0, const ControlPath& control,
                                     const BrownianPair& noise, const TimeGrid& grid,
                                     const ModelParams& p) {
    if (!(h0 > 0.0)) throw std::invalid_argument("habit_path_exact: h0 must be > 0");
    if (control.c.size() != grid.size())
        throw std::invalid_argument("habit_path_exact: control does not match grid");
    const auto e = stochastic_exponential(-p.rho, p.beta2, noise.w2, grid);
    std::vector<double> f(grid.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = control.c[i] / e[i];
    const auto acc = running_trapezoid(f, grid.dt());
    std::vector<double> h(grid.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = e[i] * (h0 + p.rho * acc[i]);
    return h;
}

AdmissibilityReport is_admissible(const PathBundle& bundle, const ModelParams& p) {
    AdmissibilityReport rep;
    const std::size_t n = bundle.grid.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(bundle.k[i] > 0.0)) {
            rep.first_violation = i;
            rep.violated = Constraint::capital_positive;
            return rep;
        }
        if (!(bundle.h[i] > 0.0)) {
            rep.first_violation = i;
            rep.violated = Constraint::habit_positive;
            return rep;
        }
        if (!(bundle.control.c[i] > 0.0)) {
            rep.first_violation = i;
            rep.violated = Constraint::consumption_positive;
            return rep;
        }
        if (bundle.control.c[i] > p.R * bundle.k[i]) {
            rep.first_violation = i;
            rep.violated = Constraint::consumption_cap;
            return rep;
        }
    }
    rep.admissible = true;
    return rep;
}

ConstantRateControl feasible_constant_rate_control(double k0, double nu,
                                                   const BrownianPair& noise,
                                                   const TimeGrid& grid,
                                                   const ModelParams& p) {
    if (!(nu > 0.0))
        throw std::invalid_argument("feasible_constant_rate_control: nu must be > 0");
    ConstantRateControl out;
    out.path.c = stochastic_exponential(0.0, p.beta1, noise.w1, grid);
    for (double& c : out.path.c) c *= nu;
    out.path.tag = ControlTag::constant_rate;
    out.rate_margin = p.B > 0.0 ? nu / p.B : std::numeric_limits<double>::infinity();
    out.cap_margin = (p.R / nu) * (k0 - out.rate_margin);
    out.feasible = out.rate_margin < k0 && out.cap_margin > 1.0;
    return out;
}

ControlPath lower_bound_strategy(double k0, const BrownianPair& noise,
                                 const TimeGrid& grid, const ModelParams& p) {
    if (!(k0 > 0.0)) throw std::invalid_argument("lower_bound_strategy: k0 must be > 0");
    if (p.B == 0.0)
        throw std::invalid_argument(
            "lower_bound_strategy: unsupported for B = 0 (k = c/B degenerates)");
    ControlPath cp;
    cp.c = stochastic_exponential(0.0, p.beta1, noise.w1, grid);
    for (double& c : cp.c) c *= p.B * k0;
    cp.tag = ControlTag::lower_bound_strategy;
    return cp;
}

double capital_moment_bound(double p_order, double t, double k0, const ModelParams& p) {
    if (!(p_order >= 1.0)) throw std::invalid_argument("capital_moment_bound: p must be >= 1");
    if (!(t >= 0.0)) throw std::invalid_argument("capital_moment_bound: t must be >= 0");
    return std::pow(k0, p_order) *
           std::exp(p_order * (p.B + 0.5 * p.beta1 * p.beta1 * (p_order - 1.0)) * t);
}

PathBundle make_bundle(double k0, double h0, ControlPath control, BrownianPair noise,
                       const ModelParams& p) {
    PathBundle b;
    b.grid = noise.grid;
    b.k = capital_path_exact(k0, control, noise, b.grid, p);
    b.h = habit_path_exact(h0, control, noise, b.grid, p);
    b.noise = std::move(noise);
    b.control = std::move(control);
    return b;
}

void write_path_csv(std::ostream& os, const PathBundle& bundle) {
    os << "t,w1,w2,c,k,h\n";
    for (std::size_t i = 0; i < bundle.grid.size(); ++i) {
        put_double(os, bundle.grid.time(i)) << ',';
        put_double(os, bundle.noise.w1[i]) << ',';
        put_double(os, bundle.noise.w2[i]) << ',';
        put_double(os, bundle.control.c[i]) << ',';
        put_double(os, bundle.k[i]) << ',';
        put_double(os, bundle.h[i]) << '\n';
    }
}

} // namespace habit

#include "habit/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace habit {

ValidationReport validate_params(const ModelParams& p) {
    ValidationReport rep;
    auto reject = [&](const char* what) {
        rep.field_error = what;
        rep.pass = false;
        return rep;
    };
    if (!(p.B >= 0.0)) return reject("B must be >= 0");
    if (!(p.rho > 0.0 && p.rho < 1.0)) return reject("rho must be in (0,1)");
    if (!(p.beta1 > 0.0)) return reject("beta1 must be > 0");
    if (!(p.beta2 > 0.0)) return reject("beta2 must be > 0");
    if (!(p.theta > 0.0)) return reject("theta must be > 0");
    if (!(p.sigma > 1.0)) return reject("sigma must be > 1");
    if (!(p.gamma >= 0.0 && p.gamma < 1.0)) return reject("gamma must be in [0,1)");
    if (!(p.R > 0.0)) return reject("R must be > 0");
    if (!(p.R >= p.B)) return reject("R must be >= B");

    rep.continuity_regime = p.continuity_regime();

    // max{2, 1/(gamma(sigma-1))}; +inf at gamma = 0.
    const double hp = p.habit_power();
    const double cap = hp > 0.0 ? std::max(2.0, 1.0 / hp)
                                : std::numeric_limits<double>::infinity();
    const double vol2 = p.beta1 * p.beta1 + p.gamma * p.gamma * p.beta2 * p.beta2;
    const double split = p.rho + 0.5 * (p.beta2 * p.beta2 - p.beta1 * p.beta1);

    if (split <= 0.0) {
        rep.condition_case = 1;
        rep.threshold = (p.sigma - 1.0) *
            (-p.gamma * p.rho - 0.5 * (p.gamma * p.beta2 * p.beta2 - p.beta1 * p.beta1)
             + cap * (p.sigma - 1.0) * vol2);
    } else {
        rep.condition_case = 2;
        rep.threshold = (p.sigma - 1.0) *
            (0.5 * p.beta1 * p.beta1 * (1.0 - p.gamma)
             + cap * (p.sigma - 1.0) * vol2);
    }
    rep.slack = p.theta - rep.threshold;
    rep.pass = p.theta > rep.threshold;
    rep.low_slack = rep.pass && rep.slack < 1e-6;
    return rep;
}

double running_utility(double c, double h, const ModelParams& p) {
    if (!(c > 0.0)) throw std::domain_error("running_utility: c must be > 0");
    if (!(h > 0.0)) throw std::domain_error("running_utility: h must be > 0");
    return -std::pow(std::pow(h, p.gamma) / c, p.sigma - 1.0) / (p.sigma - 1.0);
}

double hamiltonian_g(double c, const State& s, double p_k, double p_h, const ModelParams& p) {
    if (!(c > 0.0 && c <= p.R * s.k))
        throw std::domain_error("hamiltonian_g: c must lie in (0, R*k]");
    return -c * p_k + p.rho * c * p_h + running_utility(c, s.h, p);
}

double optimal_consumption(const State& s, double p_k, double p_h, const ModelParams& p) {
    const double d = p_k - p.rho * p_h;
    const double cap = p.R * s.k;
    const double hk = std::pow(s.h, p.habit_power());
    // d <= h^(gamma(sigma-1)) (R k)^-sigma covers d <= 0: g is increasing on (0, R k].
    if (d <= hk * std::pow(cap, -p.sigma)) return cap;
    return std::pow(hk / d, 1.0 / p.sigma);
}

double hamiltonian_G(const State& s, double p_k, double p_h, const ModelParams& p) {
    const double d = p_k - p.rho * p_h;
    const double cap = p.R * s.k;
    const double hk = std::pow(s.h, p.habit_power());
    if (d <= hk * std::pow(cap, -p.sigma)) {
        return -cap * d - std::pow(std::pow(s.h, p.gamma) / cap, p.sigma - 1.0) / (p.sigma - 1.0);
    }
    return -(1.0 + 1.0 / (p.sigma - 1.0)) *
           std::pow(std::pow(s.h, p.gamma) * d, 1.0 - 1.0 / p.sigma);
}

double h_max(const State& s, const CoState& cs, const ModelParams& p) {
    const double diffusion = 0.5 * (p.beta1 * p.beta1 * s.k * s.k * cs.q_kk +
                                    p.beta2 * p.beta2 * s.h * s.h * cs.q_hh);
    return p.B * s.k * cs.p_k - p.rho * s.h * cs.p_h + diffusion +
           hamiltonian_G(s, cs.p_k, cs.p_h, p);
}

double f_tilde(const CoState& cs, double v, const State& s, const ModelParams& p) {
    return -p.theta * v + h_max(s, cs, p);
}

double lower_bound_rhs(double k0, double h0, double C, const ModelParams& p) {
    return -C * (std::pow(std::pow(h0, p.gamma) / k0, p.sigma - 1.0) +
                 std::pow(k0, -(1.0 - p.gamma) * (p.sigma - 1.0)));
}

} // namespace habit

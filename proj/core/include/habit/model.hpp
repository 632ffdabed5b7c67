#pragma once

#include <string>

namespace habit {

/// Scalar constants of the habit-formation growth model.
///
/// B      capital growth rate (>= 0)
/// rho    habit adjustment speed, in (0,1)
/// beta1  capital volatility (> 0)
/// beta2  habit volatility (> 0)
/// theta  discount rate (> 0)
/// sigma  risk-aversion exponent (> 1)
/// gamma  habit-importance exponent, in [0,1)
/// R      consumption/capital cap (> 0, R >= B)
struct ModelParams {
    double B = 0.02;
    double rho = 0.3;
    double beta1 = 0.1;
    double beta2 = 0.1;
    double theta = 0.05;
    double sigma = 2.0;
    double gamma = 0.5;
    double R = 1.0;

    /// Degree of the value function under joint scaling of (k, h): (1-gamma)(1-sigma) < 0.
    double homogeneity_degree() const { return (1.0 - gamma) * (1.0 - sigma); }
    /// Exponent gamma*(sigma-1) appearing in the habit term of the utility.
    double habit_power() const { return gamma * (sigma - 1.0); }
    /// True when gamma*(sigma-1) <= 1 (continuity of the value function holds).
    bool continuity_regime() const { return habit_power() <= 1.0; }
};

/// Capital/habit state; both components must stay strictly positive.
struct State {
    double k = 1.0;
    double h = 1.0;
};

/// First and second derivatives of a candidate value function at a state.
/// The second-derivative block is symmetric; q_kh is stored once.
struct CoState {
    double p_k = 0.0;
    double p_h = 0.0;
    double q_kk = 0.0;
    double q_hh = 0.0;
    double q_kh = 0.0;
};

/// Outcome of the parameter check (field ranges + discount condition).
struct ValidationReport {
    bool pass = false;
    int condition_case = 0;    ///< 1 or 2: which discount-condition branch applied
    double threshold = 0.0;    ///< value the discount rate must strictly exceed
    double slack = 0.0;        ///< theta - threshold
    bool low_slack = false;    ///< passed with slack < 1e-6
    bool continuity_regime = false;
    std::string field_error;   ///< non-empty: rejected, names the offending field
};

/// Field-range checks followed by the discount condition. The branch is chosen by
/// the sign of rho + (beta2^2 - beta1^2)/2; pass requires strict inequality.
/// gamma = 0 makes the threshold infinite (the max{2, 1/(gamma(sigma-1))} factor
/// diverges), so such parameter sets always fail the discount condition.
ValidationReport validate_params(const ModelParams& p);

/// (1/(1-sigma)) * (c/h^gamma)^(1-sigma); always <= 0 for sigma > 1.
/// Throws std::domain_error for c <= 0 or h <= 0.
double running_utility(double c, double h, const ModelParams& p);

/// Consumption-dependent part of the Hamiltonian:
///   g(c) = -c*p_k + rho*c*p_h - (1/(sigma-1)) * (h^gamma/c)^(sigma-1).
/// Throws std::domain_error unless 0 < c <= R*k.
double hamiltonian_g(double c, const State& s, double p_k, double p_h, const ModelParams& p);

/// Closed-form maximizer of hamiltonian_g over (0, R*k]:
///   R*k                                  when p_k - rho*p_h <= h^(gamma(sigma-1)) (R k)^-sigma,
///   (h^(gamma(sigma-1))/(p_k-rho*p_h))^(1/sigma)  otherwise.
/// Ties at the branch boundary resolve to the corner value R*k.
double optimal_consumption(const State& s, double p_k, double p_h, const ModelParams& p);

/// Maximized consumption term G = g(optimal_consumption); continuous across the
/// branch boundary.
double hamiltonian_G(const State& s, double p_k, double p_h, const ModelParams& p);

/// Full maximized Hamiltonian:
///   B k p_k - rho h p_h + (beta1^2 k^2 q_kk + beta2^2 h^2 q_hh)/2 + G(k,h,p_k,p_h).
/// No mixed second-derivative term: the diffusion matrix is diagonal and the two
/// noises are independent, so q_kh drops out of the trace.
double h_max(const State& s, const CoState& cs, const ModelParams& p);

/// F~(Q, p, v, (k,h)) = -theta*v + h_max(...).
double f_tilde(const CoState& cs, double v, const State& s, const ModelParams& p);

/// -C * ((h0^gamma/k0)^(sigma-1) + k0^(-(1-gamma)(sigma-1))) for a caller-supplied
/// positive constant C; both terms are homogeneous of degree (1-gamma)(1-sigma).
double lower_bound_rhs(double k0, double h0, double C, const ModelParams& p);

} // namespace habit

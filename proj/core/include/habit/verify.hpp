#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "habit/hjb.hpp"
#include "habit/mc.hpp"

namespace habit {

/// Bilinear interpolation of a nodal field in log coordinates, with
/// homogeneity extension for off-grid queries: sliding (x,y) -> (x-s, y-s)
/// into the box multiplies the value by e^{degree * s}. Queries whose
/// z = ln(h/k) leaves the grid's z-range are clamped and flagged truncated.
class LogGridInterpolant {
  public:
    LogGridInterpolant() = default;
    LogGridInterpolant(GridSpec grid, std::vector<double> values, double degree);

    struct Result {
        double value = 0.0;
        bool extended = false;   ///< homogeneity slide was needed
        bool truncated = false;  ///< z outside the grid range (clamped)
    };
    Result query(double k, double h) const;

    const GridSpec& grid() const { return grid_; }

  private:
    GridSpec grid_;
    std::vector<double> values_;
    double degree_ = 0.0;
};

/// Feedback consumption map: nodal maximizer plus continuous interpolant
/// (policy scales linearly under joint state scaling, degree 1). Query results
/// are clipped to (0, R*k].
class PolicyInterpolant {
  public:
    PolicyInterpolant() = default;
    PolicyInterpolant(PolicyField nodal, const ModelParams& p);

    struct Result {
        double c = 0.0;
        bool extended = false;
        bool truncated = false;
    };
    Result query(double k, double h) const;

    const PolicyField& nodal() const { return nodal_; }

  private:
    PolicyField nodal_;
    LogGridInterpolant interp_;
    double cap_rate_ = 1.0;  // R
};

/// Nodal policy from policy_improvement plus the continuous interpolant.
PolicyInterpolant feedback_map(const ValueField& value, const ModelParams& p);

/// Consumption rule for the closed-loop stepper.
using ConsumptionRule = std::function<double(double t, double k, double h)>;

/// c(k) = R k / 2: the fixed suboptimal reference control (always admissible).
ConsumptionRule half_corner_rule(const ModelParams& p);

struct ClosedLoop {
    PathBundle bundle;
    std::size_t extended_queries = 0;
    std::size_t truncated_queries = 0;
};

/// Log-Euler stepping of the closed-loop dynamics: per step the consumption
/// rate is frozen and both states advance by their exact geometric update
///   k' = k exp((B - c/k - beta1^2/2) dt + beta1 dW1),
///   h' = h exp((rho(c/h - 1) - beta2^2/2) dt + beta2 dW2),
/// so positivity holds by construction. Noise keyed on (seed, path_index, step).
ClosedLoop simulate_closed_loop(double k0, double h0, const ConsumptionRule& rule,
                                const TimeGrid& grid, std::uint64_t seed,
                                std::uint64_t path_index, const ModelParams& p);

ClosedLoop simulate_closed_loop(double k0, double h0, const PolicyInterpolant& policy,
                                const TimeGrid& grid, std::uint64_t seed,
                                std::uint64_t path_index, const ModelParams& p);

/// Bundle source backed by the closed-loop stepper (for evaluate_utility etc.).
BundleSource closed_loop_source(double k0, double h0, PolicyInterpolant policy,
                                TimeGrid grid, std::uint64_t seed, const ModelParams& p);
BundleSource closed_loop_source(double k0, double h0, ConsumptionRule rule,
                                TimeGrid grid, std::uint64_t seed, const ModelParams& p);

/// Monte Carlo enactment of the identity J(c) = v(k0,h0) - E int e^{-theta t}(G - g) dt:
/// per path the Hamiltonian gap integrand G - g >= 0 is evaluated at value-field
/// gradients interpolated to the simulated states (common random numbers with
/// the utility estimate).
struct GapEstimate {
    McEstimate gap;            ///< E int e^{-theta t} (G - g) dt, >= 0
    McEstimate j;              ///< discounted-utility estimate on the same paths
    double v0 = 0.0;           ///< interpolated value at (k0, h0)
    double reconstruction = 0; ///< |j.mean + gap.mean - v0|
};

GapEstimate fundamental_identity_gap(const ValueField& value, const BundleSource& source,
                                     const TimeGrid& grid, std::size_t n_paths,
                                     double k0, double h0, const ModelParams& p);

/// theta - p (B + ((2p-1) beta1^2 + 4 p beta2^2)/2); the growth hypothesis
/// needs this to be positive for some admissible exponent p >= 1.
double assumption_vt_margin(double p_order, const ModelParams& p);

struct GrowthProbe {
    double p_fit = 0.0;    ///< envelope slope of ln(|v|+|grad v|) vs ln|(k,h)|
    double r_squared = 0.0;
    double p_used = 1.0;   ///< max(p_fit, 1): the hypothesis requires p >= 1
    double margin = 0.0;   ///< assumption_vt_margin(p_used)
    enum class Verdict { pass, fail, indeterminate } verdict = Verdict::indeterminate;
};

/// Least-squares fit of the radial growth of |v| + |grad v| on the outer half
/// of the grid's radius range (per-bin envelope maxima), then the growth
/// inequality evaluated at the fitted exponent. Informative: the numerical
/// field is bounded on a truncated grid, so this extrapolates.
GrowthProbe growth_probe(const ValueField& value, const ModelParams& p);

struct MomentProbe {
    std::vector<double> p_orders;
    std::vector<double> times;
    std::vector<double> joint_moment;    ///< E|(k,h)|^p, lattice row-major (p major)
    std::vector<double> joint_se;
    std::vector<double> capital_moment;  ///< E k^p on the same lattice
    std::vector<double> capital_se;
    double fitted_C = 0.0;               ///< smallest C validating the joint bound
    std::size_t capital_violations = 0;  ///< capital bound breaches beyond 3 SE
};

/// Empirical check of the joint moment bound
///   E|(k_t,h_t)|^p <= C (1 + t^(p-1/2)) |(h0,k0)|^p exp{p(B + ((2p-1)beta1^2 + 4p beta2^2)/2) t}.
/// Fits the smallest such C over the (p, t) lattice and counts violations of
/// the closed-form capital-only bound.
MomentProbe moment_probe(const BundleSource& source, const TimeGrid& grid,
                         std::size_t n_paths, std::vector<double> p_orders,
                         std::vector<double> times, double k0, double h0,
                         const ModelParams& p);

struct VerificationReport {
    double v0 = 0.0;
    McEstimate j_feedback;
    McEstimate j_reference;
    McEstimate gap_feedback;
    McEstimate gap_reference;
    double reconstruction_feedback = 0.0;
    double reconstruction_reference = 0.0;
    GrowthProbe growth;
    std::uint64_t seed = 0;
    double dt = 0.0;
    GridSpec grid;
};

struct VerificationOptions {
    std::size_t n_paths = 10000;
    double t_trunc = 200.0;
    double dt = 1e-3;
    std::uint64_t seed = 42;
};

/// Full enactment at one initial state: feedback and reference (R k/2) runs,
/// gap estimates, growth probe.
VerificationReport run_verification(const SolveResult& solved, double k0, double h0,
                                    const VerificationOptions& opts, const ModelParams& p);

/// JSON document (stable key order) for the verification report.
std::string verification_report_json(const VerificationReport& rep);

} // namespace habit

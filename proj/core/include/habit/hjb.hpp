#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "habit/model.hpp"

namespace habit {

/// Uniform grid in log coordinates x = ln k, y = ln h. Log coordinates make the
/// diffusion coefficients constant and turn the multiplicative state dynamics
/// into constant-plus-control drifts.
struct GridSpec {
    double x_min = 0.0, x_max = 1.0;
    std::size_t n_x = 65;
    double y_min = 0.0, y_max = 1.0;
    std::size_t n_y = 65;

    double dx() const { return (x_max - x_min) / double(n_x - 1); }
    double dy() const { return (y_max - y_min) / double(n_y - 1); }
    double x(std::size_t i) const { return x_min + double(i) * dx(); }
    double y(std::size_t j) const { return y_min + double(j) * dy(); }
    std::size_t index(std::size_t i, std::size_t j) const { return i * n_y + j; }
    std::size_t size() const { return n_x * n_y; }
    bool valid() const {
        return x_min < x_max && y_min < y_max && n_x >= 16 && n_y >= 16;
    }
    /// 65x65 on [ln 0.1, ln 10]^2.
    static GridSpec standard();
};

struct ValueField {
    GridSpec grid;
    std::vector<double> v;  ///< row-major, index = i * n_y + j
    std::vector<double> residual_history;
    std::size_t iterations = 0;
};

struct PolicyField {
    GridSpec grid;
    std::vector<double> c;
};

struct SolveResult {
    ValueField value;
    PolicyField policy;
    double residual = 0.0;
    bool converged = false;
    bool continuity_warning = false;  ///< gamma(sigma-1) > 1: proceeding anyway
};

struct SolverOptions {
    double tol = 1e-6;
    std::size_t max_iters = 100;
};

/// Scheme gradients mapped back from log coordinates: p_k = D-x v / k (backward
/// difference), p_h = D+y v / h (forward difference) - the pair the monotone
/// upwind discretization maximizes over. One-sided fallbacks on the outer ring.
void scheme_gradients(const ValueField& value, std::vector<double>& p_k,
                      std::vector<double>& p_h);

/// Node-wise application of the policy-frozen generator in log coordinates:
///   (B - c/k - beta1^2/2) v_x + (rho(c/h - 1) - beta2^2/2) v_y
///   + beta1^2/2 v_xx + beta2^2/2 v_yy,
/// first differences upwinded term by term (constant parts by their fixed sign,
/// the c-terms by their known signs: -c/k backward, +rho c/h forward), second
/// differences centered. Every off-diagonal stencil weight is >= 0, which is
/// what makes the scheme monotone. Returns zeros on the boundary ring.
std::vector<double> apply_generator(const ValueField& value, const PolicyField& policy,
                                    const ModelParams& p);

/// Nodal maximizer: optimal_consumption at the scheme gradients.
PolicyField policy_improvement(const ValueField& value, const ModelParams& p);

/// Stationary linear solve (theta I - L_c) v = u_c with the boundary closure
/// rows included in the system (direct sparse factorization). tol bounds the
/// permitted linear-system residual; exceeding it raises.
ValueField policy_evaluation(const PolicyField& policy, const ModelParams& p, double tol);

/// Assigns boundary values from the interior: faces take the diagonal-inward
/// neighbor scaled by the exact homogeneity factor e^{m s}, m = (1-gamma)(1-sigma);
/// the two corner regions where the inward diagonal exits the domain chain
/// along their face using the far-field modes of w(z) = e^{-m x} v(x, x+z)
/// (constant toward h << k, growth e^{gamma(sigma-1) z} toward h >> k) -
/// heuristic rows, flagged as such. Applying the closure twice changes nothing.
void boundary_closure(ValueField& value, const ModelParams& p);

struct ResidualField {
    std::vector<double> r;       ///< |theta v - H_max| per node (same stencils as solver)
    double interior_max = 0.0;
    double boundary_max = 0.0;   ///< closure-row mismatch on the outer ring
};

ResidualField hjb_residual(const ValueField& value, const ModelParams& p);

/// Policy iteration stabilized by implicit pseudo-time marching.
///
/// Plain Howard alternation admits spurious fixed points on the truncated
/// domain: along the homogeneity direction the frozen-policy operator has
/// effective discount theta_t + m * max(c/k) (m < 0), which is negative for
/// near-corner policies. The solver therefore marches v_tau = H_max - theta v
/// implicitly with 1/dtau set to that dominance deficit (plus a small margin),
/// applies a residual-minimizing scale search every few steps, and switches to
/// undamped Howard once the policy's margin turns nonnegative. A safeguard
/// returns to marching if a Howard step grows the residual.
///
/// Starts from lower_bound_rhs with C = 1 (correct sign and homogeneity class).
/// Raises on divergence (residual exceeding 10x its running minimum).
SolveResult solve_hjb(const GridSpec& grid, const ModelParams& p,
                      const SolverOptions& opts = {});

/// Homogeneity-reduced profile w(z), z = ln(h/k), with v(x,y) = e^{m x} w(y-x).
struct Reduced1D {
    double z_min = 0.0, z_max = 1.0;
    std::size_t n_z = 0;
    std::vector<double> w;
    double residual = 0.0;
    bool converged = false;
    std::size_t iterations = 0;

    double dz() const { return (z_max - z_min) / double(n_z - 1); }
    double z(std::size_t i) const { return z_min + double(i) * dz(); }
};

/// Substituting v(x,y) = e^{m x} w(y - x), m = (1-gamma)(1-sigma), into the
/// stationary equation yields the one-dimensional problem
///   theta_t w = a_t w' + (beta1^2 + beta2^2)/2 w''
///               + sup_{chat in (0,R]} { -chat (m w - (1 + rho e^{-z}) w')
///                                       - e^{gamma(sigma-1) z} chat^(1-sigma)/(sigma-1) }
/// with
///   theta_t = theta - m (B - beta1^2/2) - beta1^2 m^2 / 2,
///   a_t     = -(B - beta1^2/2) - (rho + beta2^2/2) - beta1^2 m.
/// The maximizer is the 2D closed form evaluated at k = 1, h = e^z with
/// p_k = m w - w', p_h = e^{-z} w'. Solved by the same damped policy iteration.
/// Boundary rows: w'(z_min) = 0 (w tends to a constant as h/k -> 0) and
/// w(z_max) = e^{gamma(sigma-1) dz} w(z_max - dz) (pure growth mode).
/// Aborts if the derived theta_t is not positive.
Reduced1D solve_reduced_1d(double z_min, double z_max, std::size_t n_z,
                           const ModelParams& p, double tol,
                           std::size_t max_iters = 400);

/// e^{m x} * w(y - x) with linear interpolation in z (clamped at the ends).
double reconstruct_from_reduced(const Reduced1D& red, double x, double y,
                                const ModelParams& p);

/// CSV with header k,h,v,c_star,residual (k = e^x, h = e^y), one row per node.
void write_grid_csv(std::ostream& os, const ValueField& value, const PolicyField& policy,
                    const ResidualField& residual);

namespace detail {

/// Frozen-policy linear solve with optional pseudo-time damping and an
/// optional right-hand-side override (test hook for the assembly).
ValueField evaluate_frozen(const PolicyField& policy, const ModelParams& p,
                           double inv_dt, const ValueField* previous,
                           const std::vector<double>* rhs_override);

} // namespace detail

} // namespace habit

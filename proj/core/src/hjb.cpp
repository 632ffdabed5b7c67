#include "habit/hjb.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "habit/csv.hpp"

namespace habit {

GridSpec GridSpec::standard() {
    GridSpec g;
    g.x_min = std::log(0.1);
    g.x_max = std::log(10.0);
    g.y_min = std::log(0.1);
    g.y_max = std::log(10.0);
    g.n_x = 65;
    g.n_y = 65;
    return g;
}

namespace {

struct ClosureRow {
    std::size_t node = 0;
    std::size_t src[2] = {0, 0};
    double wt[2] = {0.0, 0.0};  // wt[1] == 0 -> single source
    double factor = 1.0;
    bool heuristic = false;
};

// Linear interpolation of an off-grid coordinate onto interior nodes along one
// axis. Fails (returns false) when a bracket node would leave the interior.
bool interior_bracket(double coord, double lo, double step, std::size_t n,
                      std::size_t& idx0, double& w0) {
    const double s = (coord - lo) / step;
    double fl = std::floor(s);
    std::size_t i0 = fl < 0.0 ? 0 : std::size_t(fl);
    double frac = s - double(i0);
    if (frac < 1e-12 && i0 >= 1 && i0 <= n - 2) {  // on-node
        idx0 = i0;
        w0 = 1.0;
        return true;
    }
    if (1.0 - frac < 1e-12 && i0 + 1 >= 1 && i0 + 1 <= n - 2) {
        idx0 = i0 + 1;
        w0 = 1.0;
        return true;
    }
    if (i0 < 1 || i0 + 1 > n - 2) return false;
    idx0 = i0;
    w0 = 1.0 - frac;
    return true;
}

// Boundary rows: diagonal homogeneity wherever the diagonal-inward source is
// interior; along-face far-field rows (profile constant toward small z,
// growth mode e^{kappa z} toward large z) where it is not. All rows have
// nonnegative source weights and a single positive factor.
std::vector<ClosureRow> build_closure(const GridSpec& g, const ModelParams& p) {
    const double m = p.homogeneity_degree();
    const double kap = p.habit_power();
    const double dx = g.dx(), dy = g.dy();
    std::vector<ClosureRow> rows;
    rows.reserve(2 * (g.n_x + g.n_y));

    auto add = [&](ClosureRow r) { rows.push_back(r); };

    // rule along a column: x lands exactly on column ic, y interpolated
    auto column_rule = [&](std::size_t node, std::size_t ic, double y_src,
                           double factor, bool heur, ClosureRow& out) {
        std::size_t j0;
        double w0;
        if (!interior_bracket(y_src, g.y_min, dy, g.n_y, j0, w0)) return false;
        out.node = node;
        out.src[0] = g.index(ic, j0);
        out.wt[0] = w0;
        if (w0 < 1.0) {
            out.src[1] = g.index(ic, j0 + 1);
            out.wt[1] = 1.0 - w0;
        }
        out.factor = factor;
        out.heuristic = heur;
        return true;
    };
    auto row_rule = [&](std::size_t node, std::size_t jr, double x_src, double factor,
                        bool heur, ClosureRow& out) {
        std::size_t i0;
        double w0;
        if (!interior_bracket(x_src, g.x_min, dx, g.n_x, i0, w0)) return false;
        out.node = node;
        out.src[0] = g.index(i0, jr);
        out.wt[0] = w0;
        if (w0 < 1.0) {
            out.src[1] = g.index(i0 + 1, jr);
            out.wt[1] = 1.0 - w0;
        }
        out.factor = factor;
        out.heuristic = heur;
        return true;
    };

    const double z_mid = 0.5 * ((g.y_min + g.y_max) - (g.x_min + g.x_max));

    for (std::size_t i = 0; i < g.n_x; ++i) {
        for (std::size_t j = 0; j < g.n_y; ++j) {
            const bool left = i == 0, right = i == g.n_x - 1;
            const bool bottom = j == 0, top = j == g.n_y - 1;
            if (!(left || right || bottom || top)) continue;
            const std::size_t node = g.index(i, j);
            ClosureRow r;
            // exact homogeneity along the inward diagonal
            if (right && column_rule(node, g.n_x - 2, g.y(j) - dx, std::exp(m * dx),
                                     false, r)) { add(r); continue; }
            if (left && column_rule(node, 1, g.y(j) + dx, std::exp(-m * dx), false, r)) {
                add(r); continue;
            }
            if (top && row_rule(node, g.n_y - 2, g.x(i) - dy, std::exp(m * dy), false, r)) {
                add(r); continue;
            }
            if (bottom && row_rule(node, 1, g.x(i) + dy, std::exp(-m * dy), false, r)) {
                add(r); continue;
            }
            // Far-field fallback near the two exit corners: chain along the
            // node's own face toward its diagonal-closed part, using the
            // asymptotics of w(z) = e^{-m x} v(x, x + z). Toward z -> -inf the
            // profile tends to a constant; toward z -> +inf it grows like
            // e^{kappa z}, kappa = gamma(sigma-1). Mild factors keep the
            // boundary-interior loop stable.
            const bool small_z = (g.y(j) - g.x(i)) <= z_mid;
            ClosureRow fr;
            fr.node = node;
            fr.heuristic = true;
            fr.wt[0] = 1.0;
            if (small_z) {
                if (right && j + 1 < g.n_y) {          // w const in z
                    fr.src[0] = g.index(i, j + 1);
                    fr.factor = 1.0;
                } else if (left && j + 1 < g.n_y) {
                    fr.src[0] = g.index(i, j + 1);
                    fr.factor = 1.0;
                } else if (bottom && i >= 1) {         // scale step e^{m dx}
                    fr.src[0] = g.index(i - 1, j);
                    fr.factor = std::exp(m * dx);
                } else if (top && i + 1 < g.n_x) {
                    fr.src[0] = g.index(i + 1, j);
                    fr.factor = std::exp(-m * dx);
                } else {
                    throw std::runtime_error("boundary closure: unreachable corner node " +
                                             std::to_string(node));
                }
            } else {
                if (left && j >= 1) {                  // growth mode e^{kappa dy}
                    fr.src[0] = g.index(i, j - 1);
                    fr.factor = std::exp(kap * dy);
                } else if (right && j >= 1) {
                    fr.src[0] = g.index(i, j - 1);
                    fr.factor = std::exp(kap * dy);
                } else if (top && i + 1 < g.n_x) {     // scale + growth: e^{(kappa-m) dx}
                    fr.src[0] = g.index(i + 1, j);
                    fr.factor = std::exp((kap - m) * dx);
                } else if (bottom && i + 1 < g.n_x) {
                    fr.src[0] = g.index(i + 1, j);
                    fr.factor = std::exp((kap - m) * dx);
                } else {
                    throw std::runtime_error("boundary closure: unreachable corner node " +
                                             std::to_string(node));
                }
            }
            add(fr);
        }
    }
    return rows;
}

struct Coeffs {
    double a1;      // constant x-drift B - beta1^2/2
    double bc;      // constant y-drift -(rho + beta2^2/2)
    double Dx, Dy;  // diffusion weights beta^2 / (2 dx^2)
};

Coeffs coeffs(const GridSpec& g, const ModelParams& p) {
    Coeffs c;
    c.a1 = p.B - 0.5 * p.beta1 * p.beta1;
    c.bc = -(p.rho + 0.5 * p.beta2 * p.beta2);
    c.Dx = 0.5 * p.beta1 * p.beta1 / (g.dx() * g.dx());
    c.Dy = 0.5 * p.beta2 * p.beta2 / (g.dy() * g.dy());
    return c;
}

} // namespace

void scheme_gradients(const ValueField& value, std::vector<double>& p_k,
                      std::vector<double>& p_h) {
    const GridSpec& g = value.grid;
    const double dx = g.dx(), dy = g.dy();
    p_k.assign(g.size(), 0.0);
    p_h.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.n_x; ++i) {
        for (std::size_t j = 0; j < g.n_y; ++j) {
            const std::size_t n = g.index(i, j);
            const double vx = i > 0 ? (value.v[n] - value.v[g.index(i - 1, j)]) / dx
                                    : (value.v[g.index(1, j)] - value.v[n]) / dx;
            const double vy = j + 1 < g.n_y
                                  ? (value.v[g.index(i, j + 1)] - value.v[n]) / dy
                                  : (value.v[n] - value.v[g.index(i, j - 1)]) / dy;
            p_k[n] = vx / std::exp(g.x(i));
            p_h[n] = vy / std::exp(g.y(j));
        }
    }
}

std::vector<double> apply_generator(const ValueField& value, const PolicyField& policy,
                                    const ModelParams& p) {
    const GridSpec& g = value.grid;
    const Coeffs co = coeffs(g, p);
    const double dx = g.dx(), dy = g.dy();
    std::vector<double> out(g.size(), 0.0);
    for (std::size_t i = 1; i + 1 < g.n_x; ++i) {
        const double k = std::exp(g.x(i));
        for (std::size_t j = 1; j + 1 < g.n_y; ++j) {
            const double h = std::exp(g.y(j));
            const std::size_t n = g.index(i, j);
            const double vC = value.v[n];
            const double vE = value.v[g.index(i + 1, j)];
            const double vW = value.v[g.index(i - 1, j)];
            const double vN = value.v[g.index(i, j + 1)];
            const double vS = value.v[g.index(i, j - 1)];
            const double c = policy.c[n];
            double lv = co.Dx * (vE - 2.0 * vC + vW) + co.Dy * (vN - 2.0 * vC + vS);
            lv += std::max(co.a1, 0.0) * (vE - vC) / dx -
                  std::max(-co.a1, 0.0) * (vC - vW) / dx;
            lv += -(c / k) * (vC - vW) / dx;          // always backward
            lv += (p.rho * c / h) * (vN - vC) / dy;   // always forward
            lv += co.bc * (vC - vS) / dy;             // constant part, backward
            out[n] = lv;
        }
    }
    return out;
}

PolicyField policy_improvement(const ValueField& value, const ModelParams& p) {
    const GridSpec& g = value.grid;
    std::vector<double> p_k, p_h;
    scheme_gradients(value, p_k, p_h);
    PolicyField pol;
    pol.grid = g;
    pol.c.resize(g.size());
    for (std::size_t i = 0; i < g.n_x; ++i) {
        const double k = std::exp(g.x(i));
        for (std::size_t j = 0; j < g.n_y; ++j) {
            const std::size_t n = g.index(i, j);
            pol.c[n] = optimal_consumption({k, std::exp(g.y(j))}, p_k[n], p_h[n], p);
        }
    }
    return pol;
}

namespace detail {

ValueField evaluate_frozen(const PolicyField& policy, const ModelParams& p,
                           double inv_dt, const ValueField* previous,
                           const std::vector<double>* rhs_override) {
    const GridSpec& g = policy.grid;
    if (!g.valid()) throw std::invalid_argument("evaluate_frozen: invalid grid");
    const Coeffs co = coeffs(g, p);
    const double dx = g.dx(), dy = g.dy();
    const auto closure = build_closure(g, p);

    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> trips;
    trips.reserve(5 * g.size());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(g.size());

    for (std::size_t i = 1; i + 1 < g.n_x; ++i) {
        const double k = std::exp(g.x(i));
        for (std::size_t j = 1; j + 1 < g.n_y; ++j) {
            const double h = std::exp(g.y(j));
            const std::size_t n = g.index(i, j);
            const double c = policy.c[n];
            const double cE = co.Dx + std::max(co.a1, 0.0) / dx;
            const double cW = co.Dx + std::max(-co.a1, 0.0) / dx + (c / k) / dx;
            const double cN = co.Dy + (p.rho * c / h) / dy;
            const double cS = co.Dy + (-co.bc) / dy;
            if (!(cE >= 0.0 && cW >= 0.0 && cN >= 0.0 && cS >= 0.0)) {
                std::ostringstream msg;
                msg << "evaluate_frozen: non-monotone stencil at node (" << i << "," << j
                    << "): cE=" << cE << " cW=" << cW << " cN=" << cN << " cS=" << cS
                    << " c=" << c;
                throw std::logic_error(msg.str());
            }
            trips.emplace_back(n, g.index(i + 1, j), -cE);
            trips.emplace_back(n, g.index(i - 1, j), -cW);
            trips.emplace_back(n, g.index(i, j + 1), -cN);
            trips.emplace_back(n, g.index(i, j - 1), -cS);
            trips.emplace_back(n, n, p.theta + inv_dt + cE + cW + cN + cS);
            double u;
            if (rhs_override) {
                u = (*rhs_override)[n];
            } else {
                u = running_utility(c, h, p);
            }
            rhs[Eigen::Index(n)] = u + (previous ? inv_dt * previous->v[n] : 0.0);
        }
    }
    for (const auto& r : closure) {
        trips.emplace_back(r.node, r.node, 1.0);
        trips.emplace_back(r.node, r.src[0], -r.factor * r.wt[0]);
        if (r.wt[1] > 0.0) trips.emplace_back(r.node, r.src[1], -r.factor * r.wt[1]);
    }

    Eigen::SparseMatrix<double> A(Eigen::Index(g.size()), Eigen::Index(g.size()));
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("evaluate_frozen: sparse factorization failed");
    Eigen::VectorXd sol = lu.solve(rhs);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("evaluate_frozen: sparse solve failed");

    ValueField out;
    out.grid = g;
    out.v.assign(sol.data(), sol.data() + sol.size());
    out.iterations = 1;
    const double linres = (A * sol - rhs).cwiseAbs().maxCoeff();
    out.residual_history.assign(1, linres);
    return out;
}

} // namespace detail

ValueField policy_evaluation(const PolicyField& policy, const ModelParams& p, double tol) {
    ValueField v = detail::evaluate_frozen(policy, p, 0.0, nullptr, nullptr);
    if (!(v.residual_history[0] <= tol)) {
        std::ostringstream msg;
        msg << "policy_evaluation: linear residual " << v.residual_history[0]
            << " exceeds tol " << tol;
        throw std::runtime_error(msg.str());
    }
    return v;
}

void boundary_closure(ValueField& value, const ModelParams& p) {
    const auto closure = build_closure(value.grid, p);
    // Diagonal rows read interior nodes only; corner fallback rows chain along
    // their face (acyclic, inward), so a few sweeps reach the fixed point and
    // further applications change nothing.
    const std::size_t max_sweeps = value.grid.n_x + value.grid.n_y;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (const auto& r : closure) {
            double s = r.wt[0] * value.v[r.src[0]];
            if (r.wt[1] > 0.0) s += r.wt[1] * value.v[r.src[1]];
            const double nv = r.factor * s;
            change = std::max(change, std::fabs(nv - value.v[r.node]));
            value.v[r.node] = nv;
        }
        if (change == 0.0) return;
    }
    throw std::runtime_error("boundary_closure: closure rows failed to settle");
}

ResidualField hjb_residual(const ValueField& value, const ModelParams& p) {
    const GridSpec& g = value.grid;
    const Coeffs co = coeffs(g, p);
    const double dx = g.dx(), dy = g.dy();
    std::vector<double> p_k, p_h;
    scheme_gradients(value, p_k, p_h);

    ResidualField out;
    out.r.assign(g.size(), 0.0);
    for (std::size_t i = 1; i + 1 < g.n_x; ++i) {
        const double k = std::exp(g.x(i));
        for (std::size_t j = 1; j + 1 < g.n_y; ++j) {
            const double h = std::exp(g.y(j));
            const std::size_t n = g.index(i, j);
            const double vC = value.v[n];
            const double vE = value.v[g.index(i + 1, j)];
            const double vW = value.v[g.index(i - 1, j)];
            const double vN = value.v[g.index(i, j + 1)];
            const double vS = value.v[g.index(i, j - 1)];
            double lv = co.Dx * (vE - 2.0 * vC + vW) + co.Dy * (vN - 2.0 * vC + vS);
            lv += std::max(co.a1, 0.0) * (vE - vC) / dx -
                  std::max(-co.a1, 0.0) * (vC - vW) / dx;
            lv += co.bc * (vC - vS) / dy;
            const double gmax = hamiltonian_G({k, h}, p_k[n], p_h[n], p);
            const double res = p.theta * vC - lv - gmax;
            out.r[n] = std::fabs(res);
            out.interior_max = std::max(out.interior_max, out.r[n]);
        }
    }
    // boundary ring: deviation from the closure relations
    ValueField closed = value;
    boundary_closure(closed, p);
    for (std::size_t i = 0; i < g.n_x; ++i) {
        for (std::size_t j = 0; j < g.n_y; ++j) {
            if (i > 0 && i + 1 < g.n_x && j > 0 && j + 1 < g.n_y) continue;
            const std::size_t n = g.index(i, j);
            out.r[n] = std::fabs(closed.v[n] - value.v[n]);
            out.boundary_max = std::max(out.boundary_max, out.r[n]);
        }
    }
    return out;
}

namespace {

double max_rate(const PolicyField& pol) {
    const GridSpec& g = pol.grid;
    double r = 0.0;
    for (std::size_t i = 0; i < g.n_x; ++i) {
        const double k = std::exp(g.x(i));
        for (std::size_t j = 0; j < g.n_y; ++j) r = std::max(r, pol.c[g.index(i, j)] / k);
    }
    return r;
}

} // namespace

SolveResult solve_hjb(const GridSpec& grid, const ModelParams& p, const SolverOptions& opts) {
    if (!grid.valid()) throw std::invalid_argument("solve_hjb: invalid grid spec");
    const double m = p.homogeneity_degree();
    const double theta_t = p.theta - m * (p.B - 0.5 * p.beta1 * p.beta1) -
                           0.5 * p.beta1 * p.beta1 * m * m;

    ValueField v;
    v.grid = grid;
    v.v.resize(grid.size());
    for (std::size_t i = 0; i < grid.n_x; ++i)
        for (std::size_t j = 0; j < grid.n_y; ++j)
            v.v[grid.index(i, j)] =
                lower_bound_rhs(std::exp(grid.x(i)), std::exp(grid.y(j)), 1.0, p);

    double res = hjb_residual(v, p).interior_max;
    double res_min = res;
    bool howard = false;
    int grew = 0;
    int howard_cooldown = 0;
    double extra_damping = 0.0;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 3 * opts.max_iters;
    std::vector<double> history;
    std::size_t iters = 0;

    // a candidate inherits the value's sign; a materially positive iterate is
    // off the solution branch (the value is nonpositive)
    auto sign_violation = [](const ValueField& f) {
        double lo = 0.0, hi = -1e300;
        for (double x : f.v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        return hi > 1e-9 * std::max(1.0, -lo);
    };

    while (iters < opts.max_iters && attempts < max_attempts) {
        ++attempts;
        PolicyField pol = policy_improvement(v, p);
        const double deficit = std::max(0.0, -(theta_t + m * max_rate(pol)));
        const double inv_dt = howard ? 0.0 : deficit + 0.01 + extra_damping;
        ValueField vn = detail::evaluate_frozen(pol, p, inv_dt, &v, nullptr);
        const double rn = hjb_residual(vn, p).interior_max;
        const bool bad_sign = sign_violation(vn);
        if (howard && (bad_sign || rn > 1.5 * res)) {
            howard = false;  // safeguard: fall back to marching
            howard_cooldown = 3;
            extra_damping = std::max(extra_damping, 0.1);
            continue;
        }
        if (!howard && bad_sign) {
            extra_damping = 2.0 * extra_damping + 0.5;  // damp harder and retry
            continue;
        }
        extra_damping *= 0.7;
        grew = rn > res ? grew + 1 : 0;
        v = std::move(vn);
        res = rn;
        ++iters;
        history.push_back(res);

        if (!howard && iters % 5 == 0) {
            // residual-minimizing rescale: the slow mode of the march is the
            // overall scale of the field (homogeneous class)
            double best_s = 1.0, best_r = res;
            for (int q = 0; q < 13; ++q) {
                const double s = 0.8 * std::pow(3.0 / 0.8, q / 12.0);
                ValueField vs = v;
                for (double& x : vs.v) x *= s;
                const double rs = hjb_residual(vs, p).interior_max;
                if (rs < best_r) {
                    best_r = rs;
                    best_s = s;
                }
            }
            if (best_s != 1.0) {
                for (double& x : v.v) x *= best_s;
                res = best_r;
            }
        }
        if (howard_cooldown > 0) --howard_cooldown;
        if (!howard && howard_cooldown == 0 && deficit <= 1e-9) howard = true;
        if (res <= opts.tol) break;
        if (res > 10.0 * res_min && grew >= 8) {
            std::ostringstream msg;
            msg << "solve_hjb: residual diverged (now " << res << ", minimum " << res_min
                << "); history:";
            for (double r : history) msg << ' ' << r;
            throw std::runtime_error(msg.str());
        }
        res_min = std::min(res_min, res);
    }

    SolveResult out;
    out.policy = policy_improvement(v, p);
    v.residual_history = std::move(history);
    v.iterations = iters;
    out.value = std::move(v);
    out.residual = res;
    out.converged = res <= opts.tol;
    out.continuity_warning = !p.continuity_regime();
    return out;
}

Reduced1D solve_reduced_1d(double z_min, double z_max, std::size_t n_z,
                           const ModelParams& p, double tol, std::size_t max_iters) {
    if (!(z_min < z_max) || n_z < 16)
        throw std::invalid_argument("solve_reduced_1d: invalid grid");
    const double m = p.homogeneity_degree();
    const double kap = p.habit_power();
    const double a1 = p.B - 0.5 * p.beta1 * p.beta1;
    const double theta_t = p.theta - m * a1 - 0.5 * p.beta1 * p.beta1 * m * m;
    const double a_t = -a1 - (p.rho + 0.5 * p.beta2 * p.beta2) - p.beta1 * p.beta1 * m;
    const double bb = 0.5 * (p.beta1 * p.beta1 + p.beta2 * p.beta2);
    if (!(theta_t > 0.0)) {
        std::ostringstream msg;
        msg << "solve_reduced_1d: reduced discount theta_t = " << theta_t
            << " is not positive; the reduction is ill-posed for these parameters";
        throw std::runtime_error(msg.str());
    }

    Reduced1D red;
    red.z_min = z_min;
    red.z_max = z_max;
    red.n_z = n_z;
    red.w.resize(n_z);
    const double dz = red.dz();
    for (std::size_t i = 0; i < n_z; ++i) red.w[i] = -(std::exp(kap * red.z(i)) + 1.0);

    auto improve = [&](const std::vector<double>& w) {
        std::vector<double> chat(n_z);
        for (std::size_t i = 0; i < n_z; ++i) {
            const double wp = i + 1 < n_z ? (w[i + 1] - w[i]) / dz : (w[i] - w[i - 1]) / dz;
            const double z = red.z(i);
            chat[i] = optimal_consumption({1.0, std::exp(z)}, m * w[i] - wp,
                                          std::exp(-z) * wp, p);
        }
        return chat;
    };
    auto residual = [&](const std::vector<double>& w) {
        double r = 0.0;
        for (std::size_t i = 1; i + 1 < n_z; ++i) {
            const double wp = (w[i + 1] - w[i]) / dz;
            const double z = red.z(i);
            const double lin = std::max(a_t, 0.0) * (w[i + 1] - w[i]) / dz -
                               std::max(-a_t, 0.0) * (w[i] - w[i - 1]) / dz +
                               bb * (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (dz * dz);
            const double gmax = hamiltonian_G({1.0, std::exp(z)}, m * w[i] - wp,
                                              std::exp(-z) * wp, p);
            r = std::max(r, std::fabs(theta_t * w[i] - lin - gmax));
        }
        return r;
    };
    auto evaluate = [&](const std::vector<double>& chat, const std::vector<double>& wold,
                        double inv_dt) {
        using Trip = Eigen::Triplet<double>;
        std::vector<Trip> trips;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(Eigen::Index(n_z));
        for (std::size_t i = 1; i + 1 < n_z; ++i) {
            const double z = red.z(i);
            const double drift_c = chat[i] * (1.0 + p.rho * std::exp(-z));
            const double up = bb / (dz * dz) + std::max(a_t, 0.0) / dz + drift_c / dz;
            const double dn = bb / (dz * dz) + std::max(-a_t, 0.0) / dz;
            if (!(up >= 0.0 && dn >= 0.0))
                throw std::logic_error("solve_reduced_1d: non-monotone stencil at node " +
                                       std::to_string(i));
            trips.emplace_back(i, i, theta_t + chat[i] * m + inv_dt + up + dn);
            trips.emplace_back(i, i + 1, -up);
            trips.emplace_back(i, i - 1, -dn);
            rhs[Eigen::Index(i)] =
                running_utility(chat[i], std::exp(z), p) + inv_dt * wold[i];
        }
        trips.emplace_back(0, 0, 1.0);            // w'(z_min) = 0
        trips.emplace_back(0, 1, -1.0);
        trips.emplace_back(n_z - 1, n_z - 1, 1.0);  // growth mode at z_max
        trips.emplace_back(n_z - 1, n_z - 2, -std::exp(kap * dz));
        const Eigen::Index nn = static_cast<Eigen::Index>(n_z);
        Eigen::SparseMatrix<double> A(nn, nn);
        A.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success)
            throw std::runtime_error("solve_reduced_1d: factorization failed");
        Eigen::VectorXd sol = lu.solve(rhs);
        return std::vector<double>(sol.data(), sol.data() + sol.size());
    };

    double res = residual(red.w);
    bool howard = false;
    int howard_cooldown = 0;
    double extra_damping = 0.0;
    std::size_t iters = 0, attempts = 0;
    const std::size_t max_attempts = 3 * max_iters;
    auto sign_violation = [](const std::vector<double>& w) {
        double lo = 0.0, hi = -1e300;
        for (double x : w) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        return hi > 1e-9 * std::max(1.0, -lo);
    };
    while (iters < max_iters && attempts < max_attempts) {
        ++attempts;
        const auto chat = improve(red.w);
        const double deficit =
            std::max(0.0, -(theta_t + m * *std::max_element(chat.begin(), chat.end())));
        const double inv_dt = howard ? 0.0 : deficit + 0.01 + extra_damping;
        auto wn = evaluate(chat, red.w, inv_dt);
        const double rn = residual(wn);
        const bool bad_sign = sign_violation(wn);
        if (howard && (bad_sign || rn > 1.5 * res)) {
            howard = false;
            howard_cooldown = 3;
            extra_damping = std::max(extra_damping, 0.1);
            continue;
        }
        if (!howard && bad_sign) {
            extra_damping = 2.0 * extra_damping + 0.5;
            continue;
        }
        extra_damping *= 0.7;
        red.w = std::move(wn);
        res = rn;
        ++iters;
        if (!howard && iters % 5 == 0) {
            double best_s = 1.0, best_r = res;
            for (int q = 0; q < 13; ++q) {
                const double s = 0.8 * std::pow(3.0 / 0.8, q / 12.0);
                std::vector<double> ws(red.w);
                for (double& x : ws) x *= s;
                const double rs = residual(ws);
                if (rs < best_r) {
                    best_r = rs;
                    best_s = s;
                }
            }
            if (best_s != 1.0) {
                for (double& x : red.w) x *= best_s;
                res = best_r;
            }
        }
        if (howard_cooldown > 0) --howard_cooldown;
        if (!howard && howard_cooldown == 0 && deficit <= 1e-9) howard = true;
        if (res <= tol) break;
    }
    red.residual = res;
    red.converged = res <= tol;
    red.iterations = iters;
    return red;
}

double reconstruct_from_reduced(const Reduced1D& red, double x, double y,
                                const ModelParams& p) {
    const double m = p.homogeneity_degree();
    double z = y - x;
    z = std::clamp(z, red.z_min, red.z_max);
    const double s = (z - red.z_min) / red.dz();
    const std::size_t i0 = std::min(std::size_t(s), red.n_z - 2);
    const double frac = s - double(i0);
    const double w = (1.0 - frac) * red.w[i0] + frac * red.w[i0 + 1];
    return std::exp(m * x) * w;
}

void write_grid_csv(std::ostream& os, const ValueField& value, const PolicyField& policy,
                    const ResidualField& residual) {
    const GridSpec& g = value.grid;
    os << "k,h,v,c_star,residual\n";
    for (std::size_t i = 0; i < g.n_x; ++i) {
        for (std::size_t j = 0; j < g.n_y; ++j) {
            const std::size_t n = g.index(i, j);
            put_double(os, std::exp(g.x(i))) << ',';
            put_double(os, std::exp(g.y(j))) << ',';
            put_double(os, value.v[n]) << ',';
            put_double(os, policy.c[n]) << ',';
            put_double(os, residual.r[n]) << '\n';
        }
    }
}

} // namespace habit

#include "habit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "habit/philox.hpp"

namespace habit {

using ordered_json = nlohmann::ordered_json;

LogGridInterpolant::LogGridInterpolant(GridSpec grid, std::vector<double> values,
                                       double degree)
    : grid_(grid), values_(std::move(values)), degree_(degree) {
    if (values_.size() != grid_.size())
        throw std::invalid_argument("LogGridInterpolant: field size does not match grid");
}

LogGridInterpolant::Result LogGridInterpolant::query(double k, double h) const {
    if (!(k > 0.0 && h > 0.0))
        throw std::domain_error("LogGridInterpolant: state components must be > 0");
    Result out;
    double x = std::log(k), y = std::log(h);

    // slide along the diagonal into the box; the shift range in s is the
    // intersection of [x - x_max, x - x_min] and [y - y_max, y - y_min]
    double s_lo = std::max(x - grid_.x_max, y - grid_.y_max);
    double s_hi = std::min(x - grid_.x_min, y - grid_.y_min);
    double s = 0.0;
    if (s_lo > s_hi + 1e-12 * (1.0 + std::fabs(y - x))) {
        // z = ln(h/k) outside the representable band: clamp z, keep the scale
        out.truncated = true;
        const double z_min = grid_.y_min - grid_.x_max;
        const double z_max = grid_.y_max - grid_.x_min;
        const double z = std::clamp(y - x, z_min, z_max);
        y = x + z;
        s_lo = std::max(x - grid_.x_max, y - grid_.y_max);
        s_hi = std::min(x - grid_.x_min, y - grid_.y_min);
    }
    if (s_lo > s_hi) s_lo = s_hi = 0.5 * (s_lo + s_hi);  // roundoff-width band
    s = std::clamp(0.0, s_lo, s_hi);
    if (s != 0.0) {
        out.extended = true;
        // snap the slide to a whole number of x-cells when the admissible
        // range allows it, so scaling by a grid factor stays node-aligned
        const double snapped = grid_.dx() * std::round(s / grid_.dx());
        if (snapped >= s_lo && snapped <= s_hi && snapped != 0.0) s = snapped;
    }
    const double xs = x - s, ys = y - s;

    const double fx = (xs - grid_.x_min) / grid_.dx();
    const double fy = (ys - grid_.y_min) / grid_.dy();
    const std::size_t i0 = std::min(std::size_t(std::max(fx, 0.0)), grid_.n_x - 2);
    const std::size_t j0 = std::min(std::size_t(std::max(fy, 0.0)), grid_.n_y - 2);
    const double ax = std::clamp(fx - double(i0), 0.0, 1.0);
    const double ay = std::clamp(fy - double(j0), 0.0, 1.0);
    const double v00 = values_[grid_.index(i0, j0)];
    const double v10 = values_[grid_.index(i0 + 1, j0)];
    const double v01 = values_[grid_.index(i0, j0 + 1)];
    const double v11 = values_[grid_.index(i0 + 1, j0 + 1)];
    const double bil = (1 - ax) * ((1 - ay) * v00 + ay * v01) +
                       ax * ((1 - ay) * v10 + ay * v11);
    out.value = std::exp(degree_ * s) * bil;
    return out;
}

PolicyInterpolant::PolicyInterpolant(PolicyField nodal, const ModelParams& p)
    : nodal_(std::move(nodal)),
      interp_(nodal_.grid, nodal_.c, 1.0),  // policy scales linearly in the state
      cap_rate_(p.R) {}

PolicyInterpolant::Result PolicyInterpolant::query(double k, double h) const {
    const auto q = interp_.query(k, h);
    Result out;
    out.extended = q.extended;
    out.truncated = q.truncated;
    out.c = std::min(q.value, cap_rate_ * k);  // bilinear can overshoot the cap off-node
    return out;
}

PolicyInterpolant feedback_map(const ValueField& value, const ModelParams& p) {
    return PolicyInterpolant(policy_improvement(value, p), p);
}

ConsumptionRule half_corner_rule(const ModelParams& p) {
    const double half_rate = 0.5 * p.R;
    return [half_rate](double, double k, double) { return half_rate * k; };
}

namespace {

ClosedLoop step_closed_loop(double k0, double h0, const ConsumptionRule& rule,
                            const TimeGrid& grid, std::uint64_t seed,
                            std::uint64_t path_index, const ModelParams& p,
                            std::size_t* extended, std::size_t* truncated) {
    if (!(k0 > 0.0 && h0 > 0.0))
        throw std::invalid_argument("simulate_closed_loop: initial state must be > 0");
    ClosedLoop out;
    PathBundle& b = out.bundle;
    b.grid = grid;
    b.noise.grid = grid;
    b.noise.seed = seed;
    b.noise.path_index = path_index;
    const std::size_t n = grid.size();
    b.noise.w1.resize(n);
    b.noise.w2.resize(n);
    b.control.c.resize(n);
    b.control.tag = ControlTag::feedback;
    b.k.resize(n);
    b.h.resize(n);

    const double dt = grid.dt();
    const double sdt = std::sqrt(dt);
    double k = k0, h = h0, w1 = 0.0, w2 = 0.0;
    b.noise.w1[0] = 0.0;
    b.noise.w2[0] = 0.0;
    b.k[0] = k;
    b.h[0] = h;
    for (std::size_t s = 0; s < grid.n_steps; ++s) {
        const double c = rule(grid.time(s), k, h);
        b.control.c[s] = c;
        const NormalPair z = normal_pair(seed, path_index, s);
        k *= std::exp((p.B - c / k - 0.5 * p.beta1 * p.beta1) * dt + p.beta1 * sdt * z.z1);
        h *= std::exp((p.rho * (c / h - 1.0) - 0.5 * p.beta2 * p.beta2) * dt +
                      p.beta2 * sdt * z.z2);
        w1 += sdt * z.z1;
        w2 += sdt * z.z2;
        b.noise.w1[s + 1] = w1;
        b.noise.w2[s + 1] = w2;
        b.k[s + 1] = k;
        b.h[s + 1] = h;
    }
    b.control.c[n - 1] = rule(grid.t_end, k, h);
    if (extended) out.extended_queries = *extended;
    if (truncated) out.truncated_queries = *truncated;
    return out;
}

} // namespace

ClosedLoop simulate_closed_loop(double k0, double h0, const ConsumptionRule& rule,
                                const TimeGrid& grid, std::uint64_t seed,
                                std::uint64_t path_index, const ModelParams& p) {
    return step_closed_loop(k0, h0, rule, grid, seed, path_index, p, nullptr, nullptr);
}

ClosedLoop simulate_closed_loop(double k0, double h0, const PolicyInterpolant& policy,
                                const TimeGrid& grid, std::uint64_t seed,
                                std::uint64_t path_index, const ModelParams& p) {
    std::size_t extended = 0, truncated = 0;
    ConsumptionRule rule = [&](double, double k, double h) {
        const auto q = policy.query(k, h);
        if (q.extended) ++extended;
        if (q.truncated) ++truncated;
        return q.c;
    };
    return step_closed_loop(k0, h0, rule, grid, seed, path_index, p, &extended, &truncated);
}

BundleSource closed_loop_source(double k0, double h0, PolicyInterpolant policy,
                                TimeGrid grid, std::uint64_t seed, const ModelParams& p) {
    return [=, policy = std::move(policy)](std::uint64_t path_index, PathBundle& outb) {
        outb = simulate_closed_loop(k0, h0, policy, grid, seed, path_index, p).bundle;
    };
}

BundleSource closed_loop_source(double k0, double h0, ConsumptionRule rule,
                                TimeGrid grid, std::uint64_t seed, const ModelParams& p) {
    return [=, rule = std::move(rule)](std::uint64_t path_index, PathBundle& outb) {
        outb = simulate_closed_loop(k0, h0, rule, grid, seed, path_index, p).bundle;
    };
}

GapEstimate fundamental_identity_gap(const ValueField& value, const BundleSource& source,
                                     const TimeGrid& grid, std::size_t n_paths,
                                     double k0, double h0, const ModelParams& p) {
    if (n_paths == 0)
        throw std::invalid_argument("fundamental_identity_gap: n_paths must be > 0");
    std::vector<double> pk_nodal, ph_nodal;
    scheme_gradients(value, pk_nodal, ph_nodal);
    const double m = p.homogeneity_degree();
    LogGridInterpolant pk_interp(value.grid, pk_nodal, m - 1.0);
    LogGridInterpolant ph_interp(value.grid, ph_nodal, m - 1.0);
    LogGridInterpolant v_interp(value.grid, value.v, m);

    std::vector<double> gaps(n_paths, 0.0), js(n_paths, 0.0);
    std::vector<char> ok(n_paths, 0);
    std::size_t n_rejected = 0;

    PathBundle b;
    for (std::uint64_t i = 0; i < n_paths; ++i) {
        source(i, b);
        if (!is_admissible(b, p).admissible) {
            ++n_rejected;
            continue;
        }
        const std::size_t n = b.grid.size();
        const double dt = b.grid.dt();
        double gap = 0.0, prev = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double k = b.k[t], h = b.h[t];
            const double pk = pk_interp.query(k, h).value;
            const double ph = ph_interp.query(k, h).value;
            const State s{k, h};
            const double diff = hamiltonian_G(s, pk, ph, p) -
                                hamiltonian_g(b.control.c[t], s, pk, ph, p);
            const double f = std::exp(-p.theta * b.grid.time(t)) * diff;
            if (t > 0) gap += 0.5 * dt * (prev + f);
            prev = f;
        }
        gaps[i] = gap;
        js[i] = discounted_utility_integral(b, p);
        ok[i] = 1;
    }
    if (double(n_rejected) > 0.01 * double(n_paths))
        throw std::runtime_error("fundamental_identity_gap: > 1% paths inadmissible");

    const std::size_t n_ok = n_paths - n_rejected;
    auto summarize = [&](const std::vector<double>& xs) {
        McEstimate e;
        e.mean = pairwise_sum(xs) / double(n_ok);
        std::vector<double> d2(xs.size(), 0.0);
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (ok[i]) d2[i] = (xs[i] - e.mean) * (xs[i] - e.mean);
        e.std_err = n_ok > 1 ? std::sqrt(pairwise_sum(d2) / double(n_ok - 1) / double(n_ok))
                             : 0.0;
        e.n_paths = n_ok;
        e.t_trunc = grid.t_end;
        e.n_rejected = n_rejected;
        e.k0 = k0;
        e.h0 = h0;
        return e;
    };

    GapEstimate out;
    out.gap = summarize(gaps);
    out.j = summarize(js);
    out.v0 = v_interp.query(k0, h0).value;
    out.reconstruction = std::fabs(out.j.mean + out.gap.mean - out.v0);
    return out;
}

double assumption_vt_margin(double p_order, const ModelParams& p) {
    return p.theta -
           p_order * (p.B + 0.5 * ((2.0 * p_order - 1.0) * p.beta1 * p.beta1 +
                                   4.0 * p_order * p.beta2 * p.beta2));
}

GrowthProbe growth_probe(const ValueField& value, const ModelParams& p) {
    const GridSpec& g = value.grid;
    std::vector<double> pk, ph;
    scheme_gradients(value, pk, ph);

    // Radial growth along the diagonal ray k = h (the direction that stays in
    // the grid at every scale). |v| and |grad v| are fitted separately and the
    // growth hypothesis needs both below C (1 + r^p), so p is the larger slope.
    std::vector<double> lr, lv, lg;
    for (std::size_t i = 0; i < g.n_x; ++i) {
        const double x = g.x(i);
        if (x < g.y_min || x > g.y_max) continue;
        const double fy = (x - g.y_min) / g.dy();
        const std::size_t j = std::min(std::size_t(std::llround(fy)), g.n_y - 1);
        const std::size_t n = g.index(i, j);
        const double k = std::exp(x), h = std::exp(g.y(j));
        lr.push_back(0.5 * std::log(k * k + h * h));
        lv.push_back(std::log(std::max(std::fabs(value.v[n]), 1e-300)));
        lg.push_back(std::log(std::max(std::hypot(pk[n], ph[n]), 1e-300)));
    }
    GrowthProbe out;
    if (lr.size() < 8) return out;  // indeterminate

    auto fit_upper_half = [&](const std::vector<double>& ys, double& slope, double& r2) {
        const std::size_t start = lr.size() / 2;
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        const double n = double(lr.size() - start);
        for (std::size_t i = start; i < lr.size(); ++i) {
            sx += lr[i];
            sy += ys[i];
            sxx += lr[i] * lr[i];
            sxy += lr[i] * ys[i];
            syy += ys[i] * ys[i];
        }
        slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const double den = (n * sxx - sx * sx) * (n * syy - sy * sy);
        r2 = den > 0 ? (n * sxy - sx * sy) * (n * sxy - sx * sy) / den : 1.0;
    };
    double slope_v, r2_v, slope_g, r2_g;
    fit_upper_half(lv, slope_v, r2_v);
    fit_upper_half(lg, slope_g, r2_g);
    out.p_fit = std::max(slope_v, slope_g);
    out.r_squared = slope_v >= slope_g ? r2_v : r2_g;
    out.p_used = std::max(out.p_fit, 1.0);
    out.margin = assumption_vt_margin(out.p_used, p);
    if (out.r_squared < 0.8)
        out.verdict = GrowthProbe::Verdict::indeterminate;
    else
        out.verdict = out.margin > 0.0 ? GrowthProbe::Verdict::pass
                                       : GrowthProbe::Verdict::fail;
    return out;
}

MomentProbe moment_probe(const BundleSource& source, const TimeGrid& grid,
                         std::size_t n_paths, std::vector<double> p_orders,
                         std::vector<double> times, double k0, double h0,
                         const ModelParams& p) {
    MomentProbe out;
    out.p_orders = std::move(p_orders);
    out.times = std::move(times);
    const std::size_t np = out.p_orders.size(), nt = out.times.size();
    std::vector<std::size_t> nodes(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        const double s = out.times[t] / grid.dt();
        nodes[t] = std::min(std::size_t(std::llround(s)), grid.n_steps);
    }
    std::vector<std::vector<double>> joint(np * nt, std::vector<double>(n_paths, 0.0));
    std::vector<std::vector<double>> cap(np * nt, std::vector<double>(n_paths, 0.0));

    PathBundle b;
    for (std::uint64_t i = 0; i < n_paths; ++i) {
        source(i, b);
        for (std::size_t t = 0; t < nt; ++t) {
            const double k = b.k[nodes[t]], h = b.h[nodes[t]];
            const double r = std::hypot(k, h);
            for (std::size_t q = 0; q < np; ++q) {
                joint[q * nt + t][i] = std::pow(r, out.p_orders[q]);
                cap[q * nt + t][i] = std::pow(k, out.p_orders[q]);
            }
        }
    }
    auto mean_se = [&](const std::vector<double>& xs, double& mean, double& se) {
        mean = pairwise_sum(xs) / double(n_paths);
        std::vector<double> d2(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) d2[i] = (xs[i] - mean) * (xs[i] - mean);
        se = n_paths > 1
                 ? std::sqrt(pairwise_sum(d2) / double(n_paths - 1) / double(n_paths))
                 : 0.0;
    };
    out.joint_moment.resize(np * nt);
    out.joint_se.resize(np * nt);
    out.capital_moment.resize(np * nt);
    out.capital_se.resize(np * nt);
    const double r0 = std::hypot(k0, h0);
    out.fitted_C = 0.0;
    for (std::size_t q = 0; q < np; ++q) {
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t e = q * nt + t;
            mean_se(joint[e], out.joint_moment[e], out.joint_se[e]);
            mean_se(cap[e], out.capital_moment[e], out.capital_se[e]);
            const double po = out.p_orders[q], tt = out.times[t];
            const double shape = (1.0 + std::pow(tt, po - 0.5)) * std::pow(r0, po) *
                                 std::exp(po * (p.B + 0.5 * ((2 * po - 1) * p.beta1 * p.beta1 +
                                                             4 * po * p.beta2 * p.beta2)) *
                                          tt);
            out.fitted_C = std::max(out.fitted_C, out.joint_moment[e] / shape);
            const double bound = capital_moment_bound(po, tt, k0, p);
            if (out.capital_moment[e] > bound + 3.0 * out.capital_se[e])
                ++out.capital_violations;
        }
    }
    return out;
}

VerificationReport run_verification(const SolveResult& solved, double k0, double h0,
                                    const VerificationOptions& opts, const ModelParams& p) {
    VerificationReport rep;
    rep.seed = opts.seed;
    rep.dt = opts.dt;
    rep.grid = solved.value.grid;

    TimeGrid grid{opts.t_trunc, std::size_t(std::llround(opts.t_trunc / opts.dt))};
    if (grid.n_steps == 0) grid.n_steps = 1;

    PolicyInterpolant feedback(solved.policy, p);
    auto fb_source = closed_loop_source(k0, h0, feedback, grid, opts.seed, p);
    auto ref_source = closed_loop_source(k0, h0, half_corner_rule(p), grid, opts.seed, p);

    const auto fb = fundamental_identity_gap(solved.value, fb_source, grid,
                                             opts.n_paths, k0, h0, p);
    const auto ref = fundamental_identity_gap(solved.value, ref_source, grid,
                                              opts.n_paths, k0, h0, p);
    rep.v0 = fb.v0;
    rep.j_feedback = fb.j;
    rep.gap_feedback = fb.gap;
    rep.reconstruction_feedback = fb.reconstruction;
    rep.j_reference = ref.j;
    rep.gap_reference = ref.gap;
    rep.reconstruction_reference = ref.reconstruction;
    rep.growth = growth_probe(solved.value, p);
    return rep;
}

std::string verification_report_json(const VerificationReport& rep) {
    auto mc = [](const McEstimate& e) {
        return ordered_json{{"mean", e.mean}, {"se", e.std_err}};
    };
    ordered_json j;
    j["v0"] = rep.v0;
    j["j_feedback"] = mc(rep.j_feedback);
    j["j_reference"] = mc(rep.j_reference);
    j["gap_feedback"] = mc(rep.gap_feedback);
    j["gap_reference"] = mc(rep.gap_reference);
    j["reconstruction_feedback"] = rep.reconstruction_feedback;
    j["reconstruction_reference"] = rep.reconstruction_reference;
    const char* verdict = rep.growth.verdict == GrowthProbe::Verdict::pass     ? "pass"
                          : rep.growth.verdict == GrowthProbe::Verdict::fail   ? "fail"
                                                                               : "indeterminate";
    j["growth_probe"] = ordered_json{{"p", rep.growth.p_fit},
                                     {"p_used", rep.growth.p_used},
                                     {"r_squared", rep.growth.r_squared},
                                     {"margin", rep.growth.margin},
                                     {"pass", verdict}};
    j["seeds"] = ordered_json::array({rep.seed});
    j["dt"] = rep.dt;
    j["grid"] = ordered_json{{"x_min", rep.grid.x_min}, {"x_max", rep.grid.x_max},
                             {"n_x", rep.grid.n_x},     {"y_min", rep.grid.y_min},
                             {"y_max", rep.grid.y_max}, {"n_y", rep.grid.n_y}};
    return j.dump(2);
}

} // namespace habit

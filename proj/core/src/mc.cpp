#include "habit/mc.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "habit/csv.hpp"

namespace habit {

double pairwise_sum(const std::vector<double>& xs) {
    // bottom-up pairwise reduction; ~log2(n) rounding depth
    if (xs.empty()) return 0.0;
    std::vector<double> acc(xs);
    std::size_t n = acc.size();
    while (n > 1) {
        const std::size_t half = n / 2;
        for (std::size_t i = 0; i < half; ++i) acc[i] = acc[2 * i] + acc[2 * i + 1];
        if (n % 2) {
            acc[half] = acc[n - 1];
            n = half + 1;
        } else {
            n = half;
        }
    }
    return acc[0];
}

ControlRecipe lower_bound_recipe() {
    return {"lower-bound",
            [](double k0, const BrownianPair& noise, const TimeGrid& grid,
               const ModelParams& p) { return lower_bound_strategy(k0, noise, grid, p); }};
}

ControlRecipe constant_rate_recipe(double nu) {
    return {"constant-rate",
            [nu](double k0, const BrownianPair& noise, const TimeGrid& grid,
                 const ModelParams& p) {
                return feasible_constant_rate_control(k0, nu, noise, grid, p).path;
            }};
}

ControlRecipe constant_consumption_recipe(double cbar) {
    return {"constant-consumption",
            [cbar](double, const BrownianPair&, const TimeGrid& grid, const ModelParams&) {
                ControlPath cp;
                cp.c.assign(grid.size(), cbar);
                cp.tag = ControlTag::user;
                return cp;
            }};
}

ControlRecipe custom_recipe(std::string name,
                            std::function<ControlPath(double, const BrownianPair&,
                                                      const TimeGrid&, const ModelParams&)>
                                make) {
    return {std::move(name), std::move(make)};
}

BundleSource recipe_source(double k0, double h0, ControlRecipe recipe, TimeGrid grid,
                           std::uint64_t seed, const ModelParams& p) {
    return [=](std::uint64_t path_index, PathBundle& out) {
        BrownianPair noise = make_brownian_pair(grid, seed, path_index);
        ControlPath control = recipe.make(k0, noise, grid, p);
        out = make_bundle(k0, h0, std::move(control), std::move(noise), p);
    };
}

double discounted_utility_integral(const PathBundle& b, const ModelParams& p,
                                   std::size_t* clamped_out, double* tail_out) {
    const std::size_t n = b.grid.size();
    const double dt = b.grid.dt();
    const double tail_start = 0.9 * b.grid.t_end;
    double total = 0.0, tail = 0.0;
    std::size_t clamped = 0;
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double c = b.control.c[i];
        const double floor_c = 1e-12 * p.R * b.k[i];
        if (c < floor_c) {
            c = floor_c;
            ++clamped;
        }
        const double f = std::exp(-p.theta * b.grid.time(i)) * running_utility(c, b.h[i], p);
        if (i > 0) {
            const double piece = 0.5 * dt * (prev + f);
            total += piece;
            if (b.grid.time(i) > tail_start) tail += piece;
        }
        prev = f;
    }
    if (clamped_out) *clamped_out = clamped;
    if (tail_out) *tail_out = tail;
    return total;
}

McEstimate evaluate_utility(const BundleSource& source, const TimeGrid& grid,
                            std::size_t n_paths, const ModelParams& p) {
    if (n_paths == 0) throw std::invalid_argument("evaluate_utility: n_paths must be > 0");
    std::vector<double> js(n_paths, 0.0);
    std::vector<double> tails(n_paths, 0.0);
    std::vector<char> ok(n_paths, 0);
    std::size_t n_rejected = 0, n_clamped = 0;
    std::size_t first_reject = std::size_t(-1);
    Constraint first_constraint = Constraint::none;

    PathBundle bundle;
    McEstimate est;
    for (std::uint64_t i = 0; i < n_paths; ++i) {
        source(i, bundle);
        const auto adm = is_admissible(bundle, p);
        if (!adm.admissible) {
            ++n_rejected;
            if (first_reject == std::size_t(-1)) {
                first_reject = i;
                first_constraint = adm.violated;
            }
            continue;
        }
        std::size_t clamped = 0;
        double tail = 0.0;
        js[i] = discounted_utility_integral(bundle, p, &clamped, &tail);
        tails[i] = tail;
        n_clamped += clamped;
        ok[i] = 1;
    }
    est.k0 = bundle.k.empty() ? 0.0 : bundle.k[0];
    est.h0 = bundle.h.empty() ? 0.0 : bundle.h[0];

    if (double(n_rejected) > 0.01 * double(n_paths)) {
        std::ostringstream msg;
        msg << "evaluate_utility: " << n_rejected << " of " << n_paths
            << " paths inadmissible (first at path " << first_reject << ", constraint "
            << int(first_constraint) << "); the control is not admissible at this "
            << "state or the discretization is too coarse";
        throw std::runtime_error(msg.str());
    }

    const std::size_t n_ok = n_paths - n_rejected;
    const double mean = pairwise_sum(js) / double(n_ok);
    std::vector<double> dev2(n_paths, 0.0);
    for (std::size_t i = 0; i < n_paths; ++i)
        if (ok[i]) dev2[i] = (js[i] - mean) * (js[i] - mean);
    const double var = n_ok > 1 ? pairwise_sum(dev2) / double(n_ok - 1) : 0.0;

    est.mean = mean;
    est.std_err = n_ok > 0 ? std::sqrt(var / double(n_ok)) : 0.0;
    est.n_paths = n_ok;
    est.t_trunc = grid.t_end;
    est.tail_proxy = std::fabs(pairwise_sum(tails) / double(n_ok));
    est.n_rejected = n_rejected;
    est.n_clamped = n_clamped;
    return est;
}

McEstimate evaluate_utility(double k0, double h0, const ControlRecipe& recipe,
                            double t_trunc, std::size_t n_paths, std::uint64_t seed,
                            const ModelParams& p, double dt) {
    if (!(t_trunc > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("evaluate_utility: t_trunc and dt must be > 0");
    TimeGrid grid{t_trunc, std::size_t(std::llround(t_trunc / dt))};
    if (grid.n_steps == 0) grid.n_steps = 1;
    auto est = evaluate_utility(recipe_source(k0, h0, recipe, grid, seed, p), grid,
                                n_paths, p);
    est.k0 = k0;
    est.h0 = h0;
    return est;
}

TailCheck utility_tail_check(const McEstimate& est) {
    TailCheck out;
    if (est.mean == 0.0) {
        // cannot occur for sigma > 1; vacuous pass, flagged
        out.pass = true;
        out.anomaly = true;
        out.ratio = 0.0;
        return out;
    }
    out.ratio = est.tail_proxy / std::fabs(est.mean);
    out.pass = out.ratio <= 0.01;
    return out;
}

void write_estimate_csv(std::ostream& os, const McEstimate& est) {
    os << "k0,h0,mean,std_err,n_paths,t_trunc,tail_proxy\n";
    put_double(os, est.k0) << ',';
    put_double(os, est.h0) << ',';
    put_double(os, est.mean) << ',';
    put_double(os, est.std_err) << ',';
    os << est.n_paths << ',';
    put_double(os, est.t_trunc) << ',';
    put_double(os, est.tail_proxy) << '\n';
}

} // namespace habit

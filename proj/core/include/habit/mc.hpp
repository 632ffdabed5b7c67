#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>

#include "habit/sde.hpp"

namespace habit {

/// Monte Carlo estimate of the discounted utility integral on [0, t_trunc].
struct McEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::size_t n_paths = 0;
    double t_trunc = 0.0;
    double tail_proxy = 0.0;    ///< magnitude of the last 10% time-window contribution
    std::size_t n_rejected = 0; ///< inadmissible paths (excluded from the mean)
    std::size_t n_clamped = 0;  ///< integrand nodes where c was floored
    double k0 = 0.0;
    double h0 = 0.0;
};

/// Produces the bundle for one Monte Carlo draw. Must be a pure function of
/// path_index for fixed configuration so batches are order-independent.
using BundleSource = std::function<void(std::uint64_t path_index, PathBundle& out)>;

/// Open-loop control recipe: builds the consumption path from a noise draw.
struct ControlRecipe {
    std::string name;
    std::function<ControlPath(double k0, const BrownianPair&, const TimeGrid&,
                              const ModelParams&)>
        make;
};

ControlRecipe lower_bound_recipe();
ControlRecipe constant_rate_recipe(double nu);
ControlRecipe constant_consumption_recipe(double cbar);
/// c scaled pointwise from a caller-provided closed form of the noise.
ControlRecipe custom_recipe(std::string name,
                            std::function<ControlPath(double, const BrownianPair&,
                                                      const TimeGrid&, const ModelParams&)>
                                make);

/// Exact-simulation bundle source for an open-loop recipe.
BundleSource recipe_source(double k0, double h0, ControlRecipe recipe, TimeGrid grid,
                           std::uint64_t seed, const ModelParams& p);

/// Sample mean over n_paths of the trapezoidal integral of
/// e^{-theta t} * running_utility(c_t, h_t) on [0, t_trunc]. Inadmissible paths
/// are rejected and counted; more than 1% rejections aborts with diagnostics.
/// Inside the integrand c is floored at 1e-12 * R * k (floored nodes counted):
/// the utility is singular as c -> 0 and a reported clamp beats a silent inf.
/// Accumulation is pairwise over path slots, so the result does not depend on
/// evaluation order.
McEstimate evaluate_utility(const BundleSource& source, const TimeGrid& grid,
                            std::size_t n_paths, const ModelParams& p);

/// Convenience overload for open-loop recipes; grid = [0, t_trunc] with the
/// given dt.
McEstimate evaluate_utility(double k0, double h0, const ControlRecipe& recipe,
                            double t_trunc, std::size_t n_paths, std::uint64_t seed,
                            const ModelParams& p, double dt);

struct TailCheck {
    bool pass = false;
    bool anomaly = false;  ///< mean == 0 cannot occur for sigma > 1; flagged
    double ratio = 0.0;    ///< tail_proxy / |mean|
};

/// Pass iff tail_proxy <= 1% of |mean|; failing suggests a larger t_trunc.
TailCheck utility_tail_check(const McEstimate& est);

/// Trapezoidal integral of e^{-theta t} running_utility(c_t, h_t) over one
/// bundle, with the 1e-12 R k consumption floor; optional outputs report the
/// floored-node count and the last-10%-window contribution.
double discounted_utility_integral(const PathBundle& bundle, const ModelParams& p,
                                   std::size_t* clamped = nullptr, double* tail = nullptr);

/// CSV line format k0,h0,mean,std_err,n_paths,t_trunc,tail_proxy.
void write_estimate_csv(std::ostream& os, const McEstimate& est);

/// Deterministic pairwise sum (order-independent given the slot layout).
double pairwise_sum(const std::vector<double>& xs);

} // namespace habit

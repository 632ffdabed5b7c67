#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "habit/hjb.hpp"
#include "habit/model.hpp"

namespace habit {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct McConfig {
    std::size_t n_paths = 10000;
    double t_trunc = 0.0;  ///< default 10/theta, filled at parse time
    double dt = 1e-3;
    std::uint64_t seed = 42;
};

struct SolverConfig {
    double tol = 1e-6;
    std::size_t max_iters = 100;
};

struct StateConfig {
    double k0 = 1.0;
    double h0 = 1.0;
};

struct RunConfig {
    ModelParams params;
    GridSpec grid;       ///< default 65x65 on [ln 0.1, ln 10]^2
    McConfig mc;
    SolverConfig solver;
    StateConfig state;
    std::string output_dir = "out";
    std::vector<std::string> defaulted;  ///< dotted names of fields filled from defaults
};

/// Strict parse: unknown keys are rejected by name, types and ranges checked,
/// defaults applied and recorded in `defaulted`. `params` is required.
RunConfig parse_config_text(const std::string& json_text);
RunConfig parse_config(const std::string& path);

/// Effective configuration (all fields, post-defaulting) plus the defaulted
/// list, as a JSON document with stable key order.
std::string effective_config_json(const RunConfig& cfg);

} // namespace habit

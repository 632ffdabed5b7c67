#include "habit/config.hpp"

#include <cmath>

#include "doctest.h"

using namespace habit;

namespace {

const char* kMinimal = R"({
  "params": {"B": 0.02, "rho": 0.3, "beta1": 0.1, "beta2": 0.1,
             "theta": 0.05, "sigma": 2.0, "gamma": 0.5, "R": 1.0}
})";

} // namespace

TEST_CASE("minimal config applies documented defaults") {
    auto cfg = parse_config_text(kMinimal);
    CHECK(cfg.grid.n_x == 65);
    CHECK(cfg.grid.n_y == 65);
    CHECK(cfg.grid.x_min == doctest::Approx(std::log(0.1)));
    CHECK(cfg.grid.x_max == doctest::Approx(std::log(10.0)));
    CHECK(cfg.mc.n_paths == 10000);
    CHECK(cfg.mc.dt == doctest::Approx(1e-3));
    CHECK(cfg.mc.t_trunc == doctest::Approx(10.0 / 0.05));
    CHECK(cfg.mc.seed == 42);
    CHECK(cfg.solver.tol == doctest::Approx(1e-6));
    CHECK(cfg.state.k0 == 1.0);
    CHECK(cfg.output_dir == "out");

    // every defaulted section is recorded for the metadata echo
    auto has = [&](const char* name) {
        for (const auto& d : cfg.defaulted)
            if (d == name) return true;
        return false;
    };
    CHECK(has("grid"));
    CHECK(has("mc"));
    CHECK(has("solver"));
    CHECK(has("state"));
    CHECK(has("output_dir"));

    const std::string echo = effective_config_json(cfg);
    CHECK(echo.find("\"defaulted\"") != std::string::npos);
    CHECK(echo.find("\"t_trunc\": 200.0") != std::string::npos);
}

TEST_CASE("range violations name the key") {
    std::string bad = kMinimal;
    bad.replace(bad.find("\"sigma\": 2.0"), 12, "\"sigma\": 0.5");
    CHECK_THROWS_WITH_AS(parse_config_text(bad), "params: sigma must be > 1",
                         ConfigError);
}

TEST_CASE("unknown keys are rejected by name") {
    std::string extra = R"({
      "params": {"B": 0.02, "rho": 0.3, "beta1": 0.1, "beta2": 0.1,
                 "theta": 0.05, "sigma": 2.0, "gamma": 0.5, "R": 1.0},
      "alpha": 1.0
    })";
    CHECK_THROWS_WITH_AS(parse_config_text(extra), "unknown key 'alpha'", ConfigError);

    std::string nested = R"({
      "params": {"B": 0.02, "rho": 0.3, "beta1": 0.1, "beta2": 0.1,
                 "theta": 0.05, "sigma": 2.0, "gamma": 0.5, "R": 1.0},
      "mc": {"n_paths": 10, "burn_in": 5}
    })";
    CHECK_THROWS_WITH_AS(parse_config_text(nested), "unknown key 'mc.burn_in'",
                         ConfigError);
}

TEST_CASE("missing and mistyped keys") {
    CHECK_THROWS_WITH_AS(parse_config_text("{}"), "missing required key 'params'",
                         ConfigError);
    CHECK_THROWS_AS(parse_config_text("not json"), ConfigError);

    std::string partial = R"({
      "params": {"B": 0.02, "rho": 0.3, "beta1": 0.1, "beta2": 0.1,
                 "theta": 0.05, "sigma": 2.0, "gamma": 0.5}
    })";
    CHECK_THROWS_WITH_AS(parse_config_text(partial), "missing required key 'params.R'",
                         ConfigError);

    std::string mistyped = R"({
      "params": {"B": 0.02, "rho": 0.3, "beta1": 0.1, "beta2": 0.1,
                 "theta": 0.05, "sigma": "two", "gamma": 0.5, "R": 1.0}
    })";
    CHECK_THROWS_WITH_AS(parse_config_text(mistyped), "key 'params.sigma' must be a number",
                         ConfigError);

    std::string negseed = R"({
      "params": {"B": 0.02, "rho": 0.3, "beta1": 0.1, "beta2": 0.1,
                 "theta": 0.05, "sigma": 2.0, "gamma": 0.5, "R": 1.0},
      "mc": {"seed": -4}
    })";
    CHECK_THROWS_WITH_AS(parse_config_text(negseed),
                         "key 'mc.seed' must be a nonnegative integer", ConfigError);
}

TEST_CASE("grid and mc sanity limits") {
    std::string tiny = R"({
      "params": {"B": 0.02, "rho": 0.3, "beta1": 0.1, "beta2": 0.1,
                 "theta": 0.05, "sigma": 2.0, "gamma": 0.5, "R": 1.0},
      "grid": {"n_x": 4}
    })";
    CHECK_THROWS_AS(parse_config_text(tiny), ConfigError);

    std::string baddt = R"({
      "params": {"B": 0.02, "rho": 0.3, "beta1": 0.1, "beta2": 0.1,
                 "theta": 0.05, "sigma": 2.0, "gamma": 0.5, "R": 1.0},
      "mc": {"dt": 0.0}
    })";
    CHECK_THROWS_AS(parse_config_text(baddt), ConfigError);
}

#include "habit/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace habit {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, const char* scope,
                    std::initializer_list<const char*> known) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok)
            throw ConfigError(std::string("unknown key '") + scope + key + "'");
    }
}

double get_number(const json& obj, const char* scope, const char* key, double fallback,
                  std::vector<std::string>* defaulted) {
    if (!obj.contains(key)) {
        if (defaulted) defaulted->push_back(std::string(scope) + key);
        return fallback;
    }
    const auto& v = obj.at(key);
    if (!v.is_number())
        throw ConfigError(std::string("key '") + scope + key + "' must be a number");
    return v.get<double>();
}

std::uint64_t get_count(const json& obj, const char* scope, const char* key,
                        std::uint64_t fallback, std::vector<std::string>* defaulted) {
    if (!obj.contains(key)) {
        if (defaulted) defaulted->push_back(std::string(scope) + key);
        return fallback;
    }
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned())
        throw ConfigError(std::string("key '") + scope + key +
                          "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

} // namespace

RunConfig parse_config_text(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown(doc, "", {"params", "grid", "mc", "solver", "state", "output_dir"});

    RunConfig cfg;

    if (!doc.contains("params")) throw ConfigError("missing required key 'params'");
    const json& jp = doc.at("params");
    if (!jp.is_object()) throw ConfigError("'params' must be an object");
    reject_unknown(jp, "params.",
                   {"B", "rho", "beta1", "beta2", "theta", "sigma", "gamma", "R"});
    for (const char* key : {"B", "rho", "beta1", "beta2", "theta", "sigma", "gamma", "R"})
        if (!jp.contains(key))
            throw ConfigError(std::string("missing required key 'params.") + key + "'");
    cfg.params.B = get_number(jp, "params.", "B", 0, nullptr);
    cfg.params.rho = get_number(jp, "params.", "rho", 0, nullptr);
    cfg.params.beta1 = get_number(jp, "params.", "beta1", 0, nullptr);
    cfg.params.beta2 = get_number(jp, "params.", "beta2", 0, nullptr);
    cfg.params.theta = get_number(jp, "params.", "theta", 0, nullptr);
    cfg.params.sigma = get_number(jp, "params.", "sigma", 0, nullptr);
    cfg.params.gamma = get_number(jp, "params.", "gamma", 0, nullptr);
    cfg.params.R = get_number(jp, "params.", "R", 0, nullptr);

    // field-range gate (Assumption-1 slack is checked by `validate`, not here)
    const auto rep = validate_params(cfg.params);
    if (!rep.field_error.empty()) throw ConfigError("params: " + rep.field_error);

    const GridSpec std_grid = GridSpec::standard();
    if (doc.contains("grid")) {
        const json& jg = doc.at("grid");
        if (!jg.is_object()) throw ConfigError("'grid' must be an object");
        reject_unknown(jg, "grid.", {"x_min", "x_max", "n_x", "y_min", "y_max", "n_y"});
        cfg.grid.x_min = get_number(jg, "grid.", "x_min", std_grid.x_min, &cfg.defaulted);
        cfg.grid.x_max = get_number(jg, "grid.", "x_max", std_grid.x_max, &cfg.defaulted);
        cfg.grid.n_x = get_count(jg, "grid.", "n_x", std_grid.n_x, &cfg.defaulted);
        cfg.grid.y_min = get_number(jg, "grid.", "y_min", std_grid.y_min, &cfg.defaulted);
        cfg.grid.y_max = get_number(jg, "grid.", "y_max", std_grid.y_max, &cfg.defaulted);
        cfg.grid.n_y = get_count(jg, "grid.", "n_y", std_grid.n_y, &cfg.defaulted);
    } else {
        cfg.grid = std_grid;
        cfg.defaulted.push_back("grid");
    }
    if (!cfg.grid.valid())
        throw ConfigError("grid: requires x_min < x_max, y_min < y_max, n_x, n_y >= 16");

    const double default_t_trunc = 10.0 / cfg.params.theta;
    if (doc.contains("mc")) {
        const json& jm = doc.at("mc");
        if (!jm.is_object()) throw ConfigError("'mc' must be an object");
        reject_unknown(jm, "mc.", {"n_paths", "t_trunc", "dt", "seed"});
        cfg.mc.n_paths = get_count(jm, "mc.", "n_paths", 10000, &cfg.defaulted);
        cfg.mc.t_trunc = get_number(jm, "mc.", "t_trunc", default_t_trunc, &cfg.defaulted);
        cfg.mc.dt = get_number(jm, "mc.", "dt", 1e-3, &cfg.defaulted);
        cfg.mc.seed = get_count(jm, "mc.", "seed", 42, &cfg.defaulted);
    } else {
        cfg.mc.t_trunc = default_t_trunc;
        cfg.defaulted.push_back("mc");
    }
    if (!(cfg.mc.n_paths > 0)) throw ConfigError("mc.n_paths must be > 0");
    if (!(cfg.mc.t_trunc > 0)) throw ConfigError("mc.t_trunc must be > 0");
    if (!(cfg.mc.dt > 0 && cfg.mc.dt <= cfg.mc.t_trunc))
        throw ConfigError("mc.dt must be in (0, t_trunc]");

    if (doc.contains("solver")) {
        const json& js = doc.at("solver");
        if (!js.is_object()) throw ConfigError("'solver' must be an object");
        reject_unknown(js, "solver.", {"tol", "max_iters"});
        cfg.solver.tol = get_number(js, "solver.", "tol", 1e-6, &cfg.defaulted);
        cfg.solver.max_iters = get_count(js, "solver.", "max_iters", 100, &cfg.defaulted);
    } else {
        cfg.defaulted.push_back("solver");
    }
    if (!(cfg.solver.tol > 0)) throw ConfigError("solver.tol must be > 0");
    if (!(cfg.solver.max_iters > 0)) throw ConfigError("solver.max_iters must be > 0");

    if (doc.contains("state")) {
        const json& js = doc.at("state");
        if (!js.is_object()) throw ConfigError("'state' must be an object");
        reject_unknown(js, "state.", {"k0", "h0"});
        cfg.state.k0 = get_number(js, "state.", "k0", 1.0, &cfg.defaulted);
        cfg.state.h0 = get_number(js, "state.", "h0", 1.0, &cfg.defaulted);
    } else {
        cfg.defaulted.push_back("state");
    }
    if (!(cfg.state.k0 > 0 && cfg.state.h0 > 0))
        throw ConfigError("state.k0 and state.h0 must be > 0");

    if (doc.contains("output_dir")) {
        if (!doc.at("output_dir").is_string())
            throw ConfigError("'output_dir' must be a string");
        cfg.output_dir = doc.at("output_dir").get<std::string>();
    } else {
        cfg.defaulted.push_back("output_dir");
    }
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string effective_config_json(const RunConfig& cfg) {
    ordered_json j;
    j["params"] = ordered_json{{"B", cfg.params.B},         {"rho", cfg.params.rho},
                               {"beta1", cfg.params.beta1}, {"beta2", cfg.params.beta2},
                               {"theta", cfg.params.theta}, {"sigma", cfg.params.sigma},
                               {"gamma", cfg.params.gamma}, {"R", cfg.params.R}};
    j["grid"] = ordered_json{{"x_min", cfg.grid.x_min}, {"x_max", cfg.grid.x_max},
                             {"n_x", cfg.grid.n_x},     {"y_min", cfg.grid.y_min},
                             {"y_max", cfg.grid.y_max}, {"n_y", cfg.grid.n_y}};
    j["mc"] = ordered_json{{"n_paths", cfg.mc.n_paths},
                           {"t_trunc", cfg.mc.t_trunc},
                           {"dt", cfg.mc.dt},
                           {"seed", cfg.mc.seed}};
    // output_dir is deliberately omitted: artifacts must not depend on where
    // they are written
    j["solver"] = ordered_json{{"tol", cfg.solver.tol}, {"max_iters", cfg.solver.max_iters}};
    j["state"] = ordered_json{{"k0", cfg.state.k0}, {"h0", cfg.state.h0}};
    j["defaulted"] = cfg.defaulted;
    return j.dump(2);
}

} // namespace habit

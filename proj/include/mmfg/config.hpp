#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfg/continuation.hpp"
#include "mmfg/solver_config.hpp"

namespace mmfg {

/// key = value pairs from a plain-text file (# starts a comment line).
inline std::map<std::string, std::string> parse_key_value_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    std::map<std::string, std::string> out;
    std::string line;
    auto trim = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        std::size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(is, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line without '=': " + line);
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config line with empty key: " + line);
        out[key] = val;
    }
    return out;
}

inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw std::invalid_argument("empty list value: " + s);
    return out;
}

/// Full experiment configuration: run parameters plus model overrides. Keys
/// not recognized here are forwarded to the model factory, which rejects
/// anything its model does not declare.
struct ExperimentConfig {
    std::string model_name = "monotone-conv";
    std::map<std::string, double> model_overrides;
    int grid_n = 64;
    int tree_depth = 8;
    double x0 = 0.0;
    SolverConfig solver;
    ContinuationConfig continuation;
    std::vector<double> sigma_list = {0.5, 1.0, 2.0, 4.0};
    std::vector<double> T_list = {1.0, 2.0, 4.0, 8.0};
    std::string out_dir = ".";
    std::uint64_t seed = 20240801ull;

    void apply(const std::map<std::string, std::string>& kv) {
        for (const auto& [key, val] : kv) {
            if (key == "model") {
                model_name = val;
            } else if (key == "grid.n") {
                grid_n = std::stoi(val);
            } else if (key == "tree.K") {
                tree_depth = std::stoi(val);
            } else if (key == "x0") {
                x0 = std::stod(val);
            } else if (key == "seed") {
                seed = std::stoull(val);
            } else if (key == "out") {
                out_dir = val;
            } else if (key == "solver.substeps" || key == "solver.m") {
                solver.substeps = std::stoi(val);
            } else if (key == "solver.inner_tol") {
                solver.inner_tol = std::stod(val);
            } else if (key == "solver.outer_tol") {
                solver.outer_tol = std::stod(val);
            } else if (key == "solver.inner_max_iter") {
                solver.inner_max_iter = std::stoi(val);
            } else if (key == "solver.outer_max_iter") {
                solver.outer_max_iter = std::stoi(val);
            } else if (key == "solver.damping") {
                solver.damping = std::stod(val);
            } else if (key == "solver.trunc_radius") {
                solver.trunc_radius = std::stod(val);
            } else if (key == "solver.use_truncation") {
                solver.use_truncation = std::stoi(val) != 0;
            } else if (key == "continuation.window") {
                continuation.window = std::stod(val);
            } else if (key == "continuation.depth") {
                continuation.window_depth = std::stoi(val);
            } else if (key == "continuation.x0_points") {
                continuation.x0_points = std::stoi(val);
            } else if (key == "continuation.mu_shifts") {
                continuation.mu_shifts = std::stoi(val);
            } else if (key == "continuation.samples") {
                continuation.path_samples = std::stoi(val);
            } else if (key == "sweep.sigma0") {
                sigma_list = parse_double_list(val);
            } else if (key == "sweep.T") {
                T_list = parse_double_list(val);
            } else {
                // model key; numeric only, validated by the model factory
                try {
                    model_overrides[key] = std::stod(val);
                } catch (const std::exception&) {
                    throw std::invalid_argument("config key '" + key +
                                                "' has a non-numeric value '" + val + "'");
                }
            }
        }
    }

    ModelSpec make() const { return make_model(model_name, model_overrides); }
};

}  // namespace mmfg

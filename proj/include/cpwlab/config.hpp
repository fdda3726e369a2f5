#pragma once

// Flat key=value configuration: measurement-chain defaults that rarely
// change between runs. Looked up from --config or the CPWLAB_CONFIG
// environment variable.

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

#include "cpwlab/errors.hpp"
#include "cpwlab/trace.hpp"  // detail::trim / parse_double

namespace cpwlab {

struct Config {
    double eps_r = 11.45;
    double temp_k = 0.05;
    double atten_db = 90.0;
    int fit_max_iterations = 200;
    double fit_step_tol = 1e-10;

    void validate() const {
        if (!(eps_r >= 1.0)) throw SchemaError("config: eps_r must be >= 1");
        if (!(temp_k > 0.0)) throw SchemaError("config: temp_k must be > 0");
        if (!(atten_db >= 0.0)) throw SchemaError("config: atten_db must be >= 0");
        if (fit_max_iterations < 1) throw SchemaError("config: fit_max_iterations must be >= 1");
        if (!(fit_step_tol > 0.0)) throw SchemaError("config: fit_step_tol must be > 0");
    }
};

inline Config load_config(std::istream& is) {
    Config cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = detail::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw SchemaError("config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string val = detail::trim(stripped.substr(eq + 1));
        if (key == "eps_r")
            cfg.eps_r = detail::parse_double(val, line_no, "eps_r");
        else if (key == "temp_k")
            cfg.temp_k = detail::parse_double(val, line_no, "temp_k");
        else if (key == "atten_db")
            cfg.atten_db = detail::parse_double(val, line_no, "atten_db");
        else if (key == "fit_max_iterations")
            cfg.fit_max_iterations =
                static_cast<int>(detail::parse_double(val, line_no, "fit_max_iterations"));
        else if (key == "fit_step_tol")
            cfg.fit_step_tol = detail::parse_double(val, line_no, "fit_step_tol");
        else
            throw SchemaError("config line " + std::to_string(line_no) + ": unknown key '" +
                              key + "'");
    }
    cfg.validate();
    return cfg;
}

inline Config load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    return load_config(is);
}

// Explicit path, else CPWLAB_CONFIG, else built-in defaults.
inline Config resolve_config(const std::optional<std::string>& explicit_path) {
    if (explicit_path) return load_config(*explicit_path);
    if (const char* env = std::getenv("CPWLAB_CONFIG")) return load_config(env);
    return {};
}

}  // namespace cpwlab

// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rdlab/dense.hpp"
#include "rdlab/eig.hpp"
#include "rdlab/optim.hpp"
#include "rdlab/problems.hpp"
#include "rdlab/rng.hpp"

namespace rdlab::harness {

using nlohmann::json;

/// Configuration problem with the offending field in the message.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(field) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

namespace cfgdetail {

inline void check_keys(const json& j, const std::string& path,
                       const std::set<std::string>& allowed) {
    if (!j.is_object()) {
        throw ConfigError(path, "expected an object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (allowed.find(it.key()) == allowed.end()) {
            throw ConfigError(path + "." + it.key(), "unknown key");
        }
    }
}

inline const json& require(const json& j, const std::string& path, const std::string& key) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw ConfigError(path + "." + key, "missing required key");
    }
    return *it;
}

inline double get_number(const json& j, const std::string& path, const std::string& key) {
    const json& v = require(j, path, key);
    if (!v.is_number()) {
        throw ConfigError(path + "." + key, "expected a number");
    }
    return v.get<double>();
}

inline double get_number_or(const json& j, const std::string& path, const std::string& key,
                            double fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number()) {
        throw ConfigError(path + "." + key, "expected a number");
    }
    return it->get<double>();
}

inline long get_count(const json& j, const std::string& path, const std::string& key) {
    const json& v = require(j, path, key);
    if (!v.is_number_integer() || v.get<long>() < 0) {
        throw ConfigError(path + "." + key, "expected a nonnegative integer");
    }
    return v.get<long>();
}

inline long get_count_or(const json& j, const std::string& path, const std::string& key,
                         long fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number_integer() || it->get<long>() < 0) {
        throw ConfigError(path + "." + key, "expected a nonnegative integer");
    }
    return it->get<long>();
}

inline std::string get_string(const json& j, const std::string& path, const std::string& key) {
    const json& v = require(j, path, key);
    if (!v.is_string()) {
        throw ConfigError(path + "." + key, "expected a string");
    }
    return v.get<std::string>();
}

inline DenseMatrix get_vector(const json& j, const std::string& path, const std::string& key) {
    const json& v = require(j, path, key);
    if (!v.is_array() || v.empty()) {
        throw ConfigError(path + "." + key, "expected a nonempty array of numbers");
    }
    std::vector<double> data;
    for (const auto& x : v) {
        if (!x.is_number()) {
            throw ConfigError(path + "." + key, "expected numeric entries");
        }
        data.push_back(x.get<double>());
    }
    return DenseMatrix::column(std::move(data));
}

inline DenseMatrix get_matrix(const json& j, const std::string& path, const std::string& key) {
    const json& v = require(j, path, key);
    if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty()) {
        throw ConfigError(path + "." + key, "expected a nonempty 2-d array");
    }
    const std::size_t rows = v.size();
    const std::size_t cols = v[0].size();
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const auto& row : v) {
        if (!row.is_array() || row.size() != cols) {
            throw ConfigError(path + "." + key, "ragged rows in matrix");
        }
        for (const auto& x : row) {
            if (!x.is_number()) {
                throw ConfigError(path + "." + key, "expected numeric entries");
            }
            data.push_back(x.get<double>());
        }
    }
    return DenseMatrix(rows, cols, std::move(data));
}

inline void require_spd(const DenseMatrix& m, const std::string& path, double floor = 0.0) {
    SymEig eig;
    try {
        eig = sym_eig(m, 1e-9);
    } catch (const std::exception& e) {
        throw ConfigError(path, std::string("not a symmetric matrix: ") + e.what());
    }
    if (eig.eigenvalues.front() < floor) {
        throw ConfigError(path, "matrix is not positive (semi)definite");
    }
}

}  // namespace cfgdetail

/// Tagged problem description plus the data needed to build initial
/// parameter blocks.
struct ProblemSpec {
    enum class Kind { Quadratic, BiQuadratic, LinearAE, TwoLayer };

    Kind kind = Kind::Quadratic;

    // quadratic / biquadratic
    problems::QuadraticObjective quad;
    problems::BiQuadraticRD biquad;
    DenseMatrix init_theta;

    // linear_ae
    std::size_t ae_latent_dim = 0;
    double ae_init_scale = 1e-2;
    double ae_lambda = 0.0;

    // two_layer
    std::size_t tl_input_dim = 0;
    std::size_t tl_latent_dim = 0;
    DenseMatrix tl_input_cov;
    double tl_lambda = 0.0;
    std::size_t tl_batch_size = 64;
    double tl_init_scale = 0.1;

    bool stochastic() const { return kind == Kind::TwoLayer; }

    bool has_components() const { return kind != Kind::Quadratic; }

    std::optional<DenseMatrix> exact_hessian() const {
        if (kind == Kind::Quadratic) return quad.exact_hessian();
        if (kind == Kind::BiQuadratic) return biquad.exact_hessian();
        return std::nullopt;
    }
};

struct OptimizerSpec {
    enum class Kind { Sgd, Sign, Adam, Adagrad, Shampoo, Soap, Newton };

    Kind kind = Kind::Sgd;
    optim::AdamSettings adam;
    double adagrad_eps = 1e-8;
    optim::KroneckerSettings kron;
    optim::SoapSettings soap;
    double newton_damping = 1e-6;

    std::string name() const {
        switch (kind) {
            case Kind::Sgd: return "sgd";
            case Kind::Sign: return "sign";
            case Kind::Adam: return "adam";
            case Kind::Adagrad: return "adagrad";
            case Kind::Shampoo: return "shampoo";
            case Kind::Soap: return "soap";
            case Kind::Newton: return "newton";
        }
        return "?";
    }
};

struct ExperimentConfig {
    std::string name;
    ProblemSpec problem;
    OptimizerSpec optimizer;
    double lr = 1e-2;
    long steps = 1;
    std::uint64_t seed = 0;
    long record_every = 1;
    std::vector<std::string> diagnostics;
    std::string output_path;

    bool wants(const std::string& metric) const {
        for (const auto& m : diagnostics)
            if (m == metric) return true;
        return false;
    }
};

inline ProblemSpec parse_problem(const json& j, const std::string& path) {
    using cfgdetail::check_keys;
    using cfgdetail::get_count_or;
    using cfgdetail::get_matrix;
    using cfgdetail::get_number;
    using cfgdetail::get_number_or;
    using cfgdetail::get_string;
    using cfgdetail::get_vector;
    using cfgdetail::require_spd;

    ProblemSpec spec;
    const std::string type = get_string(j, path, "type");
    if (type == "quadratic") {
        check_keys(j, path, {"type", "hessian", "anchor", "init"});
        spec.kind = ProblemSpec::Kind::Quadratic;
        spec.quad.hessian = get_matrix(j, path, "hessian");
        spec.quad.anchor = get_vector(j, path, "anchor");
        spec.init_theta = get_vector(j, path, "init");
        if (spec.quad.hessian.rows() != spec.quad.anchor.rows() ||
            spec.quad.hessian.rows() != spec.quad.hessian.cols()) {
            throw ConfigError(path + ".hessian", "dimensions do not match anchor");
        }
        if (spec.init_theta.rows() != spec.quad.anchor.rows()) {
            throw ConfigError(path + ".init", "dimension does not match anchor");
        }
        require_spd(spec.quad.hessian, path + ".hessian", 1e-12);
    } else if (type == "biquadratic") {
        check_keys(j, path,
                   {"type", "hessian_r", "hessian_d", "anchor_r", "anchor_d", "lambda", "init"});
        spec.kind = ProblemSpec::Kind::BiQuadratic;
        spec.biquad.hessian_r = get_matrix(j, path, "hessian_r");
        spec.biquad.hessian_d = get_matrix(j, path, "hessian_d");
        spec.biquad.anchor_r = get_vector(j, path, "anchor_r");
        spec.biquad.anchor_d = get_vector(j, path, "anchor_d");
        spec.biquad.lambda = get_number(j, path, "lambda");
        spec.init_theta = get_vector(j, path, "init");
        const std::size_t n = spec.biquad.anchor_r.rows();
        if (spec.biquad.hessian_r.rows() != n || spec.biquad.hessian_r.cols() != n ||
            spec.biquad.hessian_d.rows() != n || spec.biquad.hessian_d.cols() != n ||
            spec.biquad.anchor_d.rows() != n || spec.init_theta.rows() != n) {
            throw ConfigError(path, "inconsistent dimensions across fields");
        }
        if (spec.biquad.lambda < 0.0) {
            throw ConfigError(path + ".lambda", "must be nonnegative");
        }
        require_spd(spec.biquad.hessian_r, path + ".hessian_r", -1e-10);
        require_spd(spec.biquad.hessian_d, path + ".hessian_d", -1e-10);
        require_spd(spec.biquad.exact_hessian(), path, 1e-12);
    } else if (type == "linear_ae") {
        check_keys(j, path, {"type", "latent_dim", "init_scale", "lambda"});
        spec.kind = ProblemSpec::Kind::LinearAE;
        const long m = cfgdetail::get_count(j, path, "latent_dim");
        if (m < 1) throw ConfigError(path + ".latent_dim", "must be >= 1");
        spec.ae_latent_dim = static_cast<std::size_t>(m);
        spec.ae_init_scale = get_number_or(j, path, "init_scale", 1e-2);
        if (spec.ae_init_scale <= 0.0) {
            throw ConfigError(path + ".init_scale", "must be positive");
        }
        spec.ae_lambda = get_number_or(j, path, "lambda", 0.0);
        if (spec.ae_lambda < 0.0) throw ConfigError(path + ".lambda", "must be nonnegative");
    } else if (type == "two_layer") {
        check_keys(j, path,
                   {"type", "latent_dim", "input_cov", "input_cov_cond", "cov_seed", "input_dim",
                    "lambda", "batch_size", "init_scale"});
        spec.kind = ProblemSpec::Kind::TwoLayer;
        const long m = cfgdetail::get_count(j, path, "latent_dim");
        if (m < 1) throw ConfigError(path + ".latent_dim", "must be >= 1");
        spec.tl_latent_dim = static_cast<std::size_t>(m);
        if (j.contains("input_cov")) {
            if (j.contains("input_cov_cond") || j.contains("cov_seed") ||
                j.contains("input_dim")) {
                throw ConfigError(path + ".input_cov",
                                  "give either an explicit matrix or a generated covariance");
            }
            spec.tl_input_cov = get_matrix(j, path, "input_cov");
            if (spec.tl_input_cov.rows() != spec.tl_input_cov.cols()) {
                throw ConfigError(path + ".input_cov", "must be square");
            }
            require_spd(spec.tl_input_cov, path + ".input_cov", 1e-12);
        } else {
            const long d = cfgdetail::get_count(j, path, "input_dim");
            if (d < 1) throw ConfigError(path + ".input_dim", "must be >= 1");
            const double cond = get_number_or(j, path, "input_cov_cond", 1.0);
            if (cond < 1.0) throw ConfigError(path + ".input_cov_cond", "must be >= 1");
            const long cov_seed = get_count_or(j, path, "cov_seed", 0);
            spec.tl_input_cov = problems::random_spd_with_condition(
                static_cast<std::size_t>(d), cond, static_cast<std::uint64_t>(cov_seed));
        }
        spec.tl_input_dim = spec.tl_input_cov.rows();
        spec.tl_lambda = get_number_or(j, path, "lambda", 0.0);
        if (spec.tl_lambda < 0.0) throw ConfigError(path + ".lambda", "must be nonnegative");
        const long bs = get_count_or(j, path, "batch_size", 64);
        if (bs < 1) throw ConfigError(path + ".batch_size", "must be >= 1");
        spec.tl_batch_size = static_cast<std::size_t>(bs);
        spec.tl_init_scale = get_number_or(j, path, "init_scale", 0.1);
        if (spec.tl_init_scale <= 0.0) {
            throw ConfigError(path + ".init_scale", "must be positive");
        }
    } else {
        throw ConfigError(path + ".type", "unknown problem tag '" + type + "'");
    }
    return spec;
}

inline OptimizerSpec parse_optimizer(const json& j, const std::string& path) {
    using cfgdetail::check_keys;
    using cfgdetail::get_count_or;
    using cfgdetail::get_number_or;
    using cfgdetail::get_string;

    OptimizerSpec spec;
    const std::string type = get_string(j, path, "type");
    auto parse_adam_part = [&](optim::AdamSettings& s) {
        s.beta1 = get_number_or(j, path, "beta1", s.beta1);
        s.beta2 = get_number_or(j, path, "beta2", s.beta2);
        s.eps = get_number_or(j, path, "eps", s.eps);
        try {
            s.validate();
        } catch (const std::exception& e) {
            throw ConfigError(path, e.what());
        }
    };
    auto parse_kron_part = [&](optim::KroneckerSettings& s, const char* freq_key) {
        s.ema_decay = get_number_or(j, path, "ema_decay", s.ema_decay);
        s.damping = get_number_or(j, path, "damping", s.damping);
        s.update_freq = get_count_or(j, path, freq_key, s.update_freq);
        try {
            s.validate();
        } catch (const std::exception& e) {
            throw ConfigError(path, e.what());
        }
    };

    if (type == "sgd" || type == "sign") {
        check_keys(j, path, {"type"});
        spec.kind = type == "sgd" ? OptimizerSpec::Kind::Sgd : OptimizerSpec::Kind::Sign;
    } else if (type == "adam") {
        check_keys(j, path, {"type", "beta1", "beta2", "eps"});
        spec.kind = OptimizerSpec::Kind::Adam;
        parse_adam_part(spec.adam);
    } else if (type == "adagrad") {
        check_keys(j, path, {"type", "eps"});
        spec.kind = OptimizerSpec::Kind::Adagrad;
        spec.adagrad_eps = get_number_or(j, path, "eps", 1e-8);
        if (spec.adagrad_eps <= 0.0) throw ConfigError(path + ".eps", "must be positive");
    } else if (type == "shampoo") {
        check_keys(j, path, {"type", "ema_decay", "damping", "update_freq"});
        spec.kind = OptimizerSpec::Kind::Shampoo;
        parse_kron_part(spec.kron, "update_freq");
    } else if (type == "soap") {
        check_keys(j, path,
                   {"type", "ema_decay", "damping", "refresh_period", "beta1", "beta2", "eps"});
        spec.kind = OptimizerSpec::Kind::Soap;
        parse_kron_part(spec.soap.factors, "refresh_period");
        parse_adam_part(spec.soap.adam);
    } else if (type == "newton") {
        check_keys(j, path, {"type", "damping"});
        spec.kind = OptimizerSpec::Kind::Newton;
        spec.newton_damping = get_number_or(j, path, "damping", 1e-6);
        if (spec.newton_damping < 0.0) throw ConfigError(path + ".damping", "must be >= 0");
    } else {
        throw ConfigError(path + ".type", "unknown optimizer tag '" + type + "'");
    }
    return spec;
}

inline ExperimentConfig parse_config(const json& j) {
    using cfgdetail::check_keys;
    check_keys(j, "config",
               {"name", "problem", "optimizer", "lr", "steps", "seed", "record_every",
                "diagnostics", "output_path"});

    ExperimentConfig cfg;
    cfg.name = cfgdetail::get_string(j, "config", "name");
    cfg.problem = parse_problem(cfgdetail::require(j, "config", "problem"), "problem");
    cfg.optimizer = parse_optimizer(cfgdetail::require(j, "config", "optimizer"), "optimizer");
    cfg.lr = cfgdetail::get_number(j, "config", "lr");
    if (cfg.lr <= 0.0) throw ConfigError("config.lr", "must be positive");
    cfg.steps = cfgdetail::get_count(j, "config", "steps");
    if (cfg.steps < 1) throw ConfigError("config.steps", "must be >= 1");
    cfg.seed = static_cast<std::uint64_t>(cfgdetail::get_count(j, "config", "seed"));
    cfg.record_every = cfgdetail::get_count_or(j, "config", "record_every", 1);
    if (cfg.record_every < 1) throw ConfigError("config.record_every", "must be >= 1");

    if (j.contains("diagnostics")) {
        const json& d = j.at("diagnostics");
        if (!d.is_array()) throw ConfigError("config.diagnostics", "expected an array");
        const std::set<std::string> known{"s_intra", "s_inter", "kurt", "maxmed"};
        for (const auto& name : d) {
            if (!name.is_string() || known.find(name.get<std::string>()) == known.end()) {
                throw ConfigError("config.diagnostics",
                                  "unknown metric '" + name.dump() + "'");
            }
            cfg.diagnostics.push_back(name.get<std::string>());
        }
    }
    cfg.output_path = cfgdetail::get_string(j, "config", "output_path");

    if (cfg.optimizer.kind == OptimizerSpec::Kind::Newton &&
        !cfg.problem.exact_hessian().has_value()) {
        throw ConfigError("optimizer.type",
                          "newton requires a problem with an exact Hessian "
                          "(quadratic or biquadratic)");
    }
    return cfg;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config", "cannot open file '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return j;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    return parse_config(load_json_file(path));
}

}  // namespace rdlab::harness

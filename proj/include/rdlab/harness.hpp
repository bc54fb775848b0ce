// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rdlab/config.hpp"
#include "rdlab/diagnostics.hpp"
#include "rdlab/optim.hpp"
#include "rdlab/problems.hpp"
#include "rdlab/rng.hpp"

namespace rdlab::harness {

struct StepRecord {
    long step = 0;
    double loss_total = 0.0;
    double loss_r = 0.0;
    double loss_d = 0.0;
    std::optional<double> s_intra;
    std::optional<double> s_inter;
    double p_r_norm = 0.0;
    double p_d_norm = 0.0;
    double p_norm = 0.0;
    double g_norm = 0.0;
    std::optional<double> kurt;
    std::optional<double> maxmed;
};

namespace csvdetail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

}  // namespace csvdetail

inline constexpr const char* kCsvHeader =
    "step,loss_total,loss_r,loss_d,s_intra,s_inter,p_r_norm,p_d_norm,p_norm,g_norm,kurt,"
    "maxmed";

inline std::string to_csv(const std::vector<StepRecord>& records) {
    using csvdetail::format_double;
    using csvdetail::format_optional;
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.step);
        out += ',';
        out += format_double(r.loss_total) + ',' + format_double(r.loss_r) + ',' +
               format_double(r.loss_d) + ',';
        out += format_optional(r.s_intra) + ',' + format_optional(r.s_inter) + ',';
        out += format_double(r.p_r_norm) + ',' + format_double(r.p_d_norm) + ',' +
               format_double(r.p_norm) + ',' + format_double(r.g_norm) + ',';
        out += format_optional(r.kurt) + ',' + format_optional(r.maxmed);
        out += '\n';
    }
    return out;
}

/// Runtime bundle: the built objective plus named parameter blocks.
struct ProblemRuntime {
    ProblemSpec spec;
    problems::LinearAERD ae;
    problems::TwoLayerNetRD net;

    static ProblemRuntime build(const ProblemSpec& spec, std::uint64_t run_seed) {
        ProblemRuntime rt;
        rt.spec = spec;
        if (spec.kind == ProblemSpec::Kind::LinearAE) {
            rt.ae = problems::LinearAERD::random_init(spec.ae_latent_dim, spec.ae_init_scale,
                                                      spec.ae_lambda,
                                                      derive_seed(run_seed, 0x11717));
        } else if (spec.kind == ProblemSpec::Kind::TwoLayer) {
            CounterRng rng(derive_seed(run_seed, 0x7e7a));
            CounterRng enc_rng = rng.fork(0);
            CounterRng dec_rng = rng.fork(1);
            rt.net.enc = random_gaussian(enc_rng, spec.tl_latent_dim, spec.tl_input_dim,
                                         spec.tl_init_scale);
            rt.net.dec = random_gaussian(dec_rng, spec.tl_input_dim, spec.tl_latent_dim,
                                         spec.tl_init_scale);
            rt.net.input_cov = spec.tl_input_cov;
            rt.net.lambda = spec.tl_lambda;
            rt.net.batch_size = spec.tl_batch_size;
        }
        return rt;
    }

    optim::Params initial_params() const {
        switch (spec.kind) {
            case ProblemSpec::Kind::Quadratic:
            case ProblemSpec::Kind::BiQuadratic:
                return {{"theta", spec.init_theta}};
            case ProblemSpec::Kind::LinearAE:
                return {{"w_e", ae.w_e}, {"w_d", ae.w_d}};
            case ProblemSpec::Kind::TwoLayer:
                return {{"enc", net.enc}, {"dec", net.dec}};
        }
        throw std::logic_error("unreachable");
    }

    DenseMatrix sample_batch(std::uint64_t seed) const {
        return net.sample_batch(net.batch_size, seed);
    }

    problems::Losses loss(const optim::Params& p, const DenseMatrix* batch) const {
        switch (spec.kind) {
            case ProblemSpec::Kind::Quadratic:
                return spec.quad.loss(p[0].value);
            case ProblemSpec::Kind::BiQuadratic:
                return spec.biquad.loss(p[0].value);
            case ProblemSpec::Kind::LinearAE:
                return ae.loss(p[0].value, p[1].value);
            case ProblemSpec::Kind::TwoLayer:
                return net.loss(p[0].value, p[1].value, *batch);
        }
        throw std::logic_error("unreachable");
    }

    struct GradSet {
        optim::Blocks total;
        optim::Blocks rate;      // unweighted rate-part gradients
        optim::Blocks dist;      // unweighted distortion-part gradients
        double rate_weight = 1.0;  // total = rate_weight*rate + dist_weight*dist
        double dist_weight = 1.0;
        bool has_components = false;
    };

    GradSet grads(const optim::Params& p, const DenseMatrix* batch) const {
        GradSet gs;
        switch (spec.kind) {
            case ProblemSpec::Kind::Quadratic: {
                gs.total = {spec.quad.grad(p[0].value)};
                gs.has_components = false;
                return gs;
            }
            case ProblemSpec::Kind::BiQuadratic: {
                auto [gr, gd] = spec.biquad.grad_components(p[0].value);
                gs.rate = {gr};
                gs.dist = {gd};
                gs.rate_weight = 1.0;
                gs.dist_weight = spec.biquad.lambda;
                gs.total = {gr + spec.biquad.lambda * gd};
                gs.has_components = true;
                return gs;
            }
            case ProblemSpec::Kind::LinearAE: {
                const auto r = ae.grad_rate(p[0].value, p[1].value);
                const auto d = ae.grad_dist(p[0].value, p[1].value);
                gs.rate = {r.e, r.d};
                gs.dist = {d.e, d.d};
                gs.rate_weight = ae.lambda;
                gs.dist_weight = 1.0;
                gs.total = {d.e + ae.lambda * r.e, d.d + ae.lambda * r.d};
                gs.has_components = true;
                return gs;
            }
            case ProblemSpec::Kind::TwoLayer: {
                const auto r = net.grad_rate(p[0].value, p[1].value, *batch);
                const auto d = net.grad_dist(p[0].value, p[1].value, *batch);
                gs.rate = {r.enc, r.dec};
                gs.dist = {d.enc, d.dec};
                gs.rate_weight = net.lambda;
                gs.dist_weight = 1.0;
                gs.total = {d.enc + net.lambda * r.enc, d.dec + net.lambda * r.dec};
                gs.has_components = true;
                return gs;
            }
        }
        throw std::logic_error("unreachable");
    }

    /// Features whose outlier statistics are tracked (latent rows for
    /// the two-layer net; other problems expose none).
    std::optional<DenseMatrix> features(const optim::Params& p, const DenseMatrix* batch) const {
        if (spec.kind != ProblemSpec::Kind::TwoLayer || batch == nullptr) {
            return std::nullopt;
        }
        return net.latent(p[0].value, *batch);
    }
};

inline optim::Optimizer build_optimizer(const OptimizerSpec& spec, const ProblemSpec& problem) {
    switch (spec.kind) {
        case OptimizerSpec::Kind::Sgd: return optim::SgdOptimizer{};
        case OptimizerSpec::Kind::Sign: return optim::SignOptimizer{};
        case OptimizerSpec::Kind::Adam: return optim::AdamOptimizer(spec.adam);
        case OptimizerSpec::Kind::Adagrad: return optim::AdagradOptimizer(spec.adagrad_eps);
        case OptimizerSpec::Kind::Shampoo: return optim::ShampooOptimizer(spec.kron);
        case OptimizerSpec::Kind::Soap: return optim::SoapOptimizer(spec.soap);
        case OptimizerSpec::Kind::Newton: {
            const auto hess = problem.exact_hessian();
            if (!hess) {
                throw ConfigError("optimizer.type",
                                  "newton requires a problem with an exact Hessian");
            }
            return optim::NewtonOptimizer(*hess, spec.newton_damping);
        }
    }
    throw std::logic_error("unreachable");
}

struct RunResult {
    std::vector<StepRecord> records;
    optim::Params final_params;
    std::filesystem::path run_dir;
};

namespace rundetail {

inline std::vector<std::pair<std::string, DenseMatrix>> named(const optim::Params& params,
                                                              const optim::Blocks& blocks) {
    std::vector<std::pair<std::string, DenseMatrix>> out;
    for (std::size_t b = 0; b < params.size(); ++b) {
        out.emplace_back(params[b].id, blocks[b]);
    }
    return out;
}

inline optim::Blocks scaled(const optim::Blocks& blocks, double w) {
    optim::Blocks out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) out.push_back(b * w);
    return out;
}

inline json params_to_json(const optim::Params& params) {
    json blocks = json::array();
    for (const auto& p : params) {
        json b;
        b["id"] = p.id;
        b["rows"] = p.value.rows();
        b["cols"] = p.value.cols();
        b["data"] = p.value.data();
        blocks.push_back(std::move(b));
    }
    return json{{"blocks", std::move(blocks)}};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    out << text;
}

}  // namespace rundetail

/// Execute one experiment. Per step: (sample batch) -> gradients ->
/// optimizer step -> probe the component directions through the
/// post-step preconditioner -> diagnostics -> record. The distortion
/// probe gradient carries the tradeoff weight, so for linear
/// preconditioners p_R + p_D equals the applied step direction.
/// Deterministic in the config; writes records.csv, params.json and
/// config.json into output_path.
inline RunResult run_experiment(const ExperimentConfig& cfg,
                                const json* original_json = nullptr) {
    ProblemRuntime problem = ProblemRuntime::build(cfg.problem, cfg.seed);
    optim::Optimizer opt = build_optimizer(cfg.optimizer, cfg.problem);
    optim::Params params = problem.initial_params();
    const optim::StepConfig step_cfg{cfg.lr};

    const bool want_intra = cfg.wants("s_intra");
    const bool want_inter = cfg.wants("s_inter");
    const bool want_kurt = cfg.wants("kurt");
    const bool want_maxmed = cfg.wants("maxmed");

    RunResult result;
    std::optional<DenseMatrix> prev_p_flat;

    for (long t = 0; t < cfg.steps; ++t) {
        DenseMatrix batch;
        const DenseMatrix* batch_ptr = nullptr;
        if (cfg.problem.stochastic()) {
            batch = problem.sample_batch(
                derive_seed(cfg.seed, 0xba7c, static_cast<std::uint64_t>(t)));
            batch_ptr = &batch;
        }

        const problems::Losses losses = problem.loss(params, batch_ptr);
        const ProblemRuntime::GradSet gs = problem.grads(params, batch_ptr);
        const DenseMatrix g_flat =
            diag::flatten_blocks(rundetail::named(params, gs.total));

        const optim::Blocks updates = optim::step(opt, params, gs.total, step_cfg);
        DenseMatrix p_flat = diag::flatten_blocks(rundetail::named(params, updates));
        p_flat *= 1.0 / cfg.lr;  // update direction without the learning rate

        StepRecord rec;
        rec.step = t;
        rec.loss_total = losses.total;
        rec.loss_r = losses.rate;
        rec.loss_d = losses.dist;
        rec.g_norm = g_flat.frobenius_norm();
        rec.p_norm = p_flat.frobenius_norm();

        if (gs.has_components) {
            const optim::Blocks p_r =
                optim::precondition(opt, rundetail::scaled(gs.rate, gs.rate_weight));
            const optim::Blocks p_d =
                optim::precondition(opt, rundetail::scaled(gs.dist, gs.dist_weight));
            const DenseMatrix pr_flat = diag::flatten_blocks(rundetail::named(params, p_r));
            const DenseMatrix pd_flat = diag::flatten_blocks(rundetail::named(params, p_d));
            rec.p_r_norm = pr_flat.frobenius_norm();
            rec.p_d_norm = pd_flat.frobenius_norm();
            if (want_intra && rec.p_r_norm > 0.0 && rec.p_d_norm > 0.0) {
                rec.s_intra = diag::intra_step(pr_flat, pd_flat).value;
            }
        }
        if (want_inter && prev_p_flat && prev_p_flat->frobenius_norm() > 0.0 &&
            rec.p_norm > 0.0) {
            rec.s_inter = diag::inter_step(*prev_p_flat, p_flat).value;
        }
        if (want_kurt || want_maxmed) {
            const auto feats = problem.features(params, batch_ptr);
            if (feats && feats->frobenius_norm() > 0.0) {
                if (want_kurt) rec.kurt = diag::kurt(*feats);
                if (want_maxmed) {
                    try {
                        rec.maxmed = diag::maxmed(*feats);
                    } catch (const std::invalid_argument&) {
                        // degenerate row; leave the cell empty
                    }
                }
            }
        }

        if (t % cfg.record_every == 0) {
            result.records.push_back(rec);
        }
        prev_p_flat = std::move(p_flat);
    }

    result.final_params = params;

    const std::filesystem::path dir(cfg.output_path);
    std::filesystem::create_directories(dir);
    rundetail::write_text_file(dir / "records.csv", to_csv(result.records));
    rundetail::write_text_file(dir / "params.json",
                               rundetail::params_to_json(params).dump(2) + "\n");
    if (original_json != nullptr) {
        rundetail::write_text_file(dir / "config.json", original_json->dump(2) + "\n");
    }
    result.run_dir = dir;
    return result;
}

struct SweepCell {
    std::string name;
    std::string output_path;
    bool ok = false;
    std::string error;
};

namespace sweepdetail {

inline std::string sanitize(std::string s) {
    for (char& c : s) {
        if (c == '/' || c == '\\' || c == ' ' || c == '"') c = '_';
    }
    return s;
}

inline void apply_override(json& cfg, const std::string& dotted_path, const json& value) {
    json* node = &cfg;
    std::size_t start = 0;
    while (true) {
        const std::size_t dotpos = dotted_path.find('.', start);
        const std::string key = dotted_path.substr(start, dotpos - start);
        if (key.empty()) {
            throw ConfigError("grid." + dotted_path, "empty path segment");
        }
        if (dotpos == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        if (!node->contains(key) || !(*node)[key].is_object()) {
            throw ConfigError("grid." + dotted_path, "path does not name an object");
        }
        node = &(*node)[key];
        start = dotpos + 1;
    }
}

inline std::string value_label(const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace sweepdetail

/// Cartesian product of grid overrides applied to a base config. Cell
/// output directories are derived from the override values; a failing
/// cell is reported without stopping the sweep. The result order (and
/// each cell's content) is a pure function of the grid, independent of
/// execution order.
inline std::vector<SweepCell> sweep(const json& base_config,
                                    const std::map<std::string, std::vector<json>>& grid) {
    if (grid.empty()) {
        throw ConfigError("grid", "empty grid");
    }
    for (const auto& [key, values] : grid) {
        if (values.empty()) {
            throw ConfigError("grid." + key, "empty value list");
        }
    }

    std::vector<std::map<std::string, json>> cells{{}};
    for (const auto& [key, values] : grid) {
        std::vector<std::map<std::string, json>> next;
        for (const auto& cell : cells) {
            for (const auto& v : values) {
                auto extended = cell;
                extended[key] = v;
                next.push_back(std::move(extended));
            }
        }
        cells = std::move(next);
    }

    std::vector<SweepCell> results;
    for (const auto& cell : cells) {
        std::string name;
        for (const auto& [key, v] : cell) {
            if (!name.empty()) name += "__";
            name += sweepdetail::sanitize(key) + "=" +
                    sweepdetail::sanitize(sweepdetail::value_label(v));
        }
        SweepCell out;
        out.name = name;
        try {
            json patched = base_config;
            for (const auto& [key, v] : cell) {
                sweepdetail::apply_override(patched, key, v);
            }
            const std::string base_out =
                cfgdetail::get_string(patched, "config", "output_path");
            patched["output_path"] = base_out + "/" + name;
            const ExperimentConfig cfg = parse_config(patched);
            run_experiment(cfg, &patched);
            out.output_path = cfg.output_path;
            out.ok = true;
        } catch (const std::exception& e) {
            out.ok = false;
            out.error = e.what();
        }
        results.push_back(std::move(out));
    }
    return results;
}

struct StepsToTarget {
    std::optional<long> step_a;
    std::optional<long> step_b;
    std::optional<double> ratio;  // empty when either run never reaches the target
};

/// First-crossing step of run A divided by that of run B for a target
/// total loss. An unreached target is reported, not an error.
inline StepsToTarget steps_to_target(const std::vector<StepRecord>& records_a,
                                     const std::vector<StepRecord>& records_b,
                                     double target_loss) {
    auto first_crossing = [&](const std::vector<StepRecord>& records) -> std::optional<long> {
        for (const auto& r : records) {
            if (r.loss_total <= target_loss) return r.step;
        }
        return std::nullopt;
    };
    StepsToTarget out;
    out.step_a = first_crossing(records_a);
    out.step_b = first_crossing(records_b);
    if (out.step_a && out.step_b && *out.step_b >= 0) {
        const double a = static_cast<double>(*out.step_a);
        const double b = static_cast<double>(*out.step_b);
        if (b == 0.0) {
            out.ratio = (a == 0.0) ? 1.0 : std::numeric_limits<double>::infinity();
        } else {
            out.ratio = a / b;
        }
    }
    return out;
}

}  // namespace rdlab::harness

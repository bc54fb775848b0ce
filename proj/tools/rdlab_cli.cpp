// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: deterministic experiment runs, grid sweeps,
// the oracle suite, and the post-training quantization probe.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rdlab/config.hpp"
#include "rdlab/harness.hpp"
#include "rdlab/oracle_suites.hpp"
#include "rdlab/quant.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitOracleFailure = 2;

using rdlab::harness::json;

json load_inline_or_file(const std::string& spec) {
    if (!spec.empty() && spec.front() == '@') {
        return rdlab::harness::load_json_file(spec.substr(1));
    }
    try {
        return json::parse(spec);
    } catch (const std::exception& e) {
        throw rdlab::harness::ConfigError("grid", std::string("invalid JSON: ") + e.what());
    }
}

int cmd_run(const std::string& config_path) {
    const json raw = rdlab::harness::load_json_file(config_path);
    const rdlab::harness::ExperimentConfig cfg = rdlab::harness::parse_config(raw);
    const auto t0 = std::chrono::steady_clock::now();
    const rdlab::harness::RunResult result = rdlab::harness::run_experiment(cfg, &raw);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "run '" << cfg.name << "': " << cfg.steps << " steps, "
              << result.records.size() << " records -> " << result.run_dir.string() << " ("
              << elapsed << " s)\n";
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_spec) {
    const json base = rdlab::harness::load_json_file(config_path);
    const json grid_json = load_inline_or_file(grid_spec);
    if (!grid_json.is_object() || grid_json.empty()) {
        throw rdlab::harness::ConfigError("grid", "expected a nonempty object of value lists");
    }
    std::map<std::string, std::vector<json>> grid;
    for (auto it = grid_json.begin(); it != grid_json.end(); ++it) {
        if (!it.value().is_array() || it.value().empty()) {
            throw rdlab::harness::ConfigError("grid." + it.key(),
                                              "expected a nonempty array of values");
        }
        grid[it.key()] = std::vector<json>(it.value().begin(), it.value().end());
    }
    const auto cells = rdlab::harness::sweep(base, grid);
    bool all_ok = true;
    for (const auto& cell : cells) {
        if (cell.ok) {
            std::cerr << "cell " << cell.name << " -> " << cell.output_path << "\n";
        } else {
            all_ok = false;
            std::cerr << "cell " << cell.name << " FAILED: " << cell.error << "\n";
        }
    }
    return all_ok ? kExitOk : kExitConfigError;
}

int cmd_oracle(const std::string& suite, const std::string& out_path) {
    const auto checks = rdlab::oracles::run_suite(suite);
    if (checks.empty()) {
        throw rdlab::harness::ConfigError("suite", "unknown suite '" + suite + "'");
    }
    const std::string csv = rdlab::oracles::suite_csv(checks);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write '" + out_path + "'");
        }
        out << csv;
    }
    bool all_pass = true;
    for (const auto& c : checks) {
        std::cerr << (c.pass ? "[PASS] " : "[FAIL] ") << c.suite << "/" << c.name << ": "
                  << c.detail << "\n";
        all_pass = all_pass && c.pass;
    }
    return all_pass ? kExitOk : kExitOracleFailure;
}

rdlab::DenseMatrix block_from_json(const json& b, const std::string& id) {
    if (b.at("id").get<std::string>() != id) {
        throw rdlab::harness::ConfigError("params", "unexpected block order, wanted '" + id +
                                                        "'");
    }
    return rdlab::DenseMatrix(b.at("rows").get<std::size_t>(), b.at("cols").get<std::size_t>(),
                              b.at("data").get<std::vector<double>>());
}

int cmd_quantize(const std::string& run_dir, std::size_t batch, std::size_t n_seeds,
                 std::uint64_t base_seed, const std::string& out_path) {
    namespace fs = std::filesystem;
    const fs::path dir(run_dir);
    const json cfg_json = rdlab::harness::load_json_file((dir / "config.json").string());
    const rdlab::harness::ExperimentConfig cfg = rdlab::harness::parse_config(cfg_json);
    if (cfg.problem.kind != rdlab::harness::ProblemSpec::Kind::TwoLayer) {
        throw rdlab::harness::ConfigError("problem.type",
                                          "quantize needs a two_layer run directory");
    }
    const json params = rdlab::harness::load_json_file((dir / "params.json").string());
    const auto& blocks = params.at("blocks");
    if (!blocks.is_array() || blocks.size() != 2) {
        throw rdlab::harness::ConfigError("params", "expected two saved blocks (enc, dec)");
    }

    rdlab::problems::TwoLayerNetRD net;
    net.enc = block_from_json(blocks[0], "enc");
    net.dec = block_from_json(blocks[1], "dec");
    net.input_cov = cfg.problem.tl_input_cov;
    net.lambda = cfg.problem.tl_lambda;
    net.batch_size = cfg.problem.tl_batch_size;

    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(base_seed + i);
    const auto probe = rdlab::quant::w8a8_probe(net, batch, seeds);

    std::string csv = "seed,loss_fp,loss_q,penalty\n";
    char buf[128];
    for (const auto& s : probe.per_seed) {
        std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g\n",
                      static_cast<unsigned long long>(s.seed), s.loss_fp, s.loss_q,
                      s.loss_q - s.loss_fp);
        csv += buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,%.17g,%.17g,%.17g\n", probe.loss_fp, probe.loss_q,
                  probe.penalty);
    csv += buf;

    const std::string target =
        out_path.empty() ? (dir / "quantize.csv").string() : out_path;
    std::ofstream out(target, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + target + "'");
    }
    out << csv;
    std::cerr << "quantize: penalty " << probe.penalty << " -> " << target << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rdlab: desk-scale optimizer and rate-distortion diagnostics lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::string grid_spec;
    std::string suite;
    std::string out_path;
    std::string run_dir;
    std::size_t batch = 256;
    std::size_t n_seeds = 20;
    std::uint64_t base_seed = 9000;

    auto* run = app.add_subcommand("run", "execute one experiment config");
    run->add_option("config", config_path, "JSON experiment config")->required();

    auto* sweep = app.add_subcommand("sweep", "run a Cartesian grid of overrides");
    sweep->add_option("config", config_path, "JSON experiment config")->required();
    sweep->add_option("--grid", grid_spec, "inline JSON object or @file of override lists")
        ->required();

    auto* oracle = app.add_subcommand("oracle", "run the closed-form oracle suites");
    oracle->add_option("--suite", suite, "one suite name (default: all)");
    oracle->add_option("--out", out_path, "write the pass/fail CSV here instead of stdout");

    auto* quantize = app.add_subcommand("quantize", "8-bit probe on a saved run");
    quantize->add_option("run_dir", run_dir, "directory written by `run`")->required();
    quantize->add_option("--batch", batch, "probe batch size");
    quantize->add_option("--seeds", n_seeds, "number of probe seeds");
    quantize->add_option("--base-seed", base_seed, "first probe seed");
    quantize->add_option("--out", out_path, "penalty CSV path (default <run_dir>/quantize.csv)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (sweep->parsed()) return cmd_sweep(config_path, grid_spec);
        if (oracle->parsed()) return cmd_oracle(suite, out_path);
        if (quantize->parsed()) return cmd_quantize(run_dir, batch, n_seeds, base_seed, out_path);
    } catch (const rdlab::harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitOk;
}

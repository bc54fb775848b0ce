// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "rdlab/diagnostics.hpp"
#include "rdlab/oracles.hpp"
#include "rdlab/optim.hpp"
#include "rdlab/problems.hpp"
#include "rdlab/rng.hpp"

namespace rdlab::oracles {

struct SuiteCheck {
    std::string suite;
    std::string name;
    bool pass = false;
    double value = 0.0;  // headline measurement
    std::string detail;
    double seconds = 0.0;
};

namespace suitedetail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline DenseMatrix random_unit_vector(CounterRng& rng, std::size_t n) {
    DenseMatrix u = random_gaussian(rng, n, 1);
    const double nrm = u.frobenius_norm();
    u *= 1.0 / nrm;
    return u;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace suitedetail

/// SPD matrix with eigenvalues drawn uniformly from [min_eig, max_eig]
/// in a random orthonormal basis.
inline DenseMatrix random_spd_matrix(CounterRng& rng, std::size_t n, double min_eig,
                                     double max_eig) {
    const DenseMatrix g = random_gaussian(rng, n, n);
    DenseMatrix sym(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            sym(i, j) = 0.5 * (g(i, j) + g(j, i));
    const DenseMatrix q = sym_eig(sym).eigenvectors;
    DenseMatrix out(n, n);
    std::vector<double> eigs(n);
    for (auto& e : eigs) e = min_eig + (max_eig - min_eig) * rng.next_uniform();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += q(i, k) * eigs[k] * q(j, k);
            out(i, j) = s;
        }
    return out;
}

/// Simulated inter-step cosine of the frozen-preconditioner dynamics
/// q1 = (I - eta B) q0; the independent route checked against the
/// closed form.
inline double simulate_frozen_inter_cosine(const DenseMatrix& b, const DenseMatrix& q0,
                                           double eta) {
    DenseMatrix q1 = q0 - eta * matmul(b, q0);
    return diag::cosine(q0, q1).value;
}

inline SuiteCheck check_adam_closed_form(std::size_t instances = 100,
                                         std::uint64_t seed = 2026) {
    suitedetail::Stopwatch watch;
    CounterRng rng(seed);
    double worst = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::size_t n = 2 + (rng.next_u64() % 7);  // dims 2..8
        const DenseMatrix b = random_spd_matrix(rng, n, 0.1, 4.0);
        const DenseMatrix u = suitedetail::random_unit_vector(rng, n);
        // eta below the stability edge 2 / lambda_max(B)
        const double lam_max = sym_eig(b).eigenvalues.back();
        const double eta = (0.05 + 1.85 * rng.next_uniform()) / lam_max;
        WhitenedQuadratic inst{b, std::vector<double>(n, 1.0), eta};
        const double exact = adam_inter_cosine_exact(inst, u).exact;
        const double simulated = simulate_frozen_inter_cosine(b, u, eta);
        worst = std::max(worst, std::abs(exact - simulated));
    }
    SuiteCheck out{"adam_cosine", "closed_form_vs_simulation", worst <= 1e-12, worst,
                   "max |closed form - simulated| over " + std::to_string(instances) +
                       " random (B,u,eta)"};
    out.seconds = watch.seconds();
    return out;
}

inline SuiteCheck check_flip_flop() {
    suitedetail::Stopwatch watch;
    const DenseMatrix b = DenseMatrix::diagonal({1.0, 10.0});
    const DenseMatrix u = DenseMatrix::column({0.0, 1.0});
    WhitenedQuadratic inst{b, {1.0, 1.0}, 0.5};
    const double exact = adam_inter_cosine_exact(inst, u).exact;
    SuiteCheck out{"adam_cosine", "flip_flop_exactly_minus_one", exact == -1.0, exact,
                   "B=diag(1,10), u=e2, eta=0.5"};
    out.seconds = watch.seconds();
    return out;
}

inline SuiteCheck check_taylor_surrogate(std::uint64_t seed = 7) {
    suitedetail::Stopwatch watch;
    CounterRng rng(seed);
    const DenseMatrix b = random_spd_matrix(rng, 5, 0.2, 3.0);
    const DenseMatrix u = suitedetail::random_unit_vector(rng, 5);
    double worst_ratio = 0.0;
    for (const double eta : {1e-1, 1e-2, 1e-3}) {
        WhitenedQuadratic inst{b, std::vector<double>(5, 1.0), eta};
        const InterCosine c = adam_inter_cosine_exact(inst, u);
        worst_ratio = std::max(worst_ratio, std::abs(c.exact - c.taylor) / (eta * eta * eta));
    }
    // The cubic-normalized gap must stay bounded by an O(1) constant.
    SuiteCheck out{"adam_cosine", "taylor_surrogate_third_order", worst_ratio < 50.0,
                   worst_ratio, "max |exact - taylor| / eta^3 over eta grid"};
    out.seconds = watch.seconds();
    return out;
}

inline DenseMatrix rotation2d(double radians) {
    DenseMatrix r(2, 2);
    r(0, 0) = std::cos(radians);
    r(0, 1) = -std::sin(radians);
    r(1, 0) = std::sin(radians);
    r(1, 1) = std::cos(radians);
    return r;
}

/// The 57-degree rotated pair of SPD Hessians whose diagonally
/// preconditioned updates conflict.
inline IntraLimitInstance rotated_conflict_instance(double degrees = 57.0) {
    const DenseMatrix base = DenseMatrix::diagonal({10.0, 1.0});
    const DenseMatrix r = rotation2d(degrees * 3.14159265358979323846 / 180.0);
    const DenseMatrix h_d = matmul(r, matmul(base, r.transpose()));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    IntraLimitInstance inst;
    inst.h_r = base;
    inst.h_d = h_d;
    inst.d_diag = {1.0, 1.0};
    inst.direction = DenseMatrix::column({inv_sqrt2, -inv_sqrt2});
    return inst;
}

inline SuiteCheck check_rho_rotated_negative() {
    suitedetail::Stopwatch watch;
    const double rho = rho_adam(rotated_conflict_instance());
    SuiteCheck out{"rho_adam", "rotated_57deg_negative", rho < 0.0, rho,
                   "rho for the 57-degree rotated instance at u=(1,-1)/sqrt(2)"};
    out.seconds = watch.seconds();
    return out;
}

inline SuiteCheck check_rho_joint_diagonal(std::size_t instances = 10000,
                                           std::uint64_t seed = 11) {
    suitedetail::Stopwatch watch;
    CounterRng rng(seed);
    double lo = 1.0;
    double hi = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::size_t n = 2 + (rng.next_u64() % 5);
        IntraLimitInstance inst;
        std::vector<double> hr(n), hd(n), d(n);
        for (std::size_t k = 0; k < n; ++k) {
            hr[k] = 0.1 + 5.0 * rng.next_uniform();
            hd[k] = 0.1 + 5.0 * rng.next_uniform();
            d[k] = 0.1 + 5.0 * rng.next_uniform();
        }
        inst.h_r = DenseMatrix::diagonal(hr);
        inst.h_d = DenseMatrix::diagonal(hd);
        inst.d_diag = d;
        inst.direction = suitedetail::random_unit_vector(rng, n);
        const double rho = rho_adam(inst);
        lo = std::min(lo, rho);
        hi = std::max(hi, rho);
    }
    const bool pass = lo >= -1e-12 && hi <= 1.0 + 1e-12;
    SuiteCheck out{"rho_adam", "joint_diagonal_in_unit_interval", pass, lo,
                   "min rho over " + std::to_string(instances) + " joint-diagonal draws, max " +
                       suitedetail::fmt(hi)};
    out.seconds = watch.seconds();
    return out;
}

inline SuiteCheck check_rho_proportional_one(std::uint64_t seed = 3) {
    suitedetail::Stopwatch watch;
    CounterRng rng(seed);
    double worst = 1.0;
    for (int i = 0; i < 50; ++i) {
        const std::size_t n = 2 + (rng.next_u64() % 5);
        IntraLimitInstance inst;
        inst.h_r = random_spd_matrix(rng, n, 0.5, 4.0);
        const double alpha = 0.1 + 3.0 * rng.next_uniform();
        inst.h_d = inst.h_r * alpha;
        inst.d_diag.assign(n, 0.0);
        for (auto& v : inst.d_diag) v = 0.2 + 2.0 * rng.next_uniform();
        inst.direction = suitedetail::random_unit_vector(rng, n);
        worst = std::min(worst, rho_adam(inst));
    }
    SuiteCheck out{"rho_adam", "proportional_hessians_align", worst > 1.0 - 1e-12, worst,
                   "min rho over proportional H_R, H_D pairs"};
    out.seconds = watch.seconds();
    return out;
}

struct SllnCriteria {
    std::size_t m = 4096;
    std::size_t seeds = 200;
    std::uint64_t base_seed = 100;
};

inline SuiteCheck check_slln_orthogonality(const SllnCriteria& crit = {}) {
    suitedetail::Stopwatch watch;
    const MonteCarloCosine mc = slln_sign_cosine(crit.m, crit.seeds, crit.base_seed);
    const double ref_std = 1.0 / std::sqrt(2.0 * static_cast<double>(crit.m));
    const bool mean_ok = std::abs(mc.mean) < 0.02;
    const bool std_ok = std::abs(mc.sample_std - ref_std) < 0.3 * ref_std;
    SuiteCheck out{"slln", "asymptotic_orthogonality", mean_ok && std_ok, mc.mean,
                   "mean " + suitedetail::fmt(mc.mean) + ", std " +
                       suitedetail::fmt(mc.sample_std) + " vs 1/sqrt(2M) = " +
                       suitedetail::fmt(ref_std)};
    out.seconds = watch.seconds();
    return out;
}

/// Sign-step intra cosine measured end to end on the linear autoencoder
/// must reproduce the analytic formula seed by seed.
inline SuiteCheck check_slln_end_to_end(std::size_t m = 4096, std::size_t seeds = 200,
                                        std::uint64_t base_seed = 100) {
    suitedetail::Stopwatch watch;
    double worst = 0.0;
    for (std::size_t i = 0; i < seeds; ++i) {
        const std::uint64_t seed = base_seed + i;
        // Same stream order as slln_sign_cosine: w_e then w_d.
        const auto ae = problems::LinearAERD::random_init(m, 1e-3, 1.0, seed);
        const double analytic = sign_cosine_formula(ae.w_e, ae.w_d);

        const auto gr = ae.grad_rate(ae.w_e, ae.w_d);
        const auto gd = ae.grad_dist(ae.w_e, ae.w_d);
        optim::SignOptimizer sign_opt;
        const optim::Blocks p_r = sign_opt.precondition({gr.e, gr.d});
        const optim::Blocks p_d = sign_opt.precondition({gd.e, gd.d});
        const DenseMatrix pr_flat =
            diag::flatten_blocks({{"w_e", p_r[0]}, {"w_d", p_r[1]}});
        const DenseMatrix pd_flat =
            diag::flatten_blocks({{"w_e", p_d[0]}, {"w_d", p_d[1]}});
        const double measured = diag::intra_step(pr_flat, pd_flat).value;
        worst = std::max(worst, std::abs(measured - analytic));
    }
    SuiteCheck out{"slln", "end_to_end_matches_formula", worst <= 1e-12, worst,
                   "max |measured - analytic| over " + std::to_string(seeds) + " seeds"};
    out.seconds = watch.seconds();
    return out;
}

inline SuiteCheck check_scaled_ones_reduces(std::size_t m = 512, std::size_t seeds = 50,
                                            std::uint64_t base_seed = 5) {
    suitedetail::Stopwatch watch;
    const ScalingLaw ones = [](CounterRng&) { return std::array<double, 3>{1.0, 1.0, 1.0}; };
    const MonteCarloCosine plain = slln_sign_cosine(m, seeds, base_seed);
    const MonteCarloCosine scaled = scaled_sign_cosine(m, seeds, ones, base_seed);
    double worst = 0.0;
    for (std::size_t i = 0; i < seeds; ++i) {
        worst = std::max(worst, std::abs(plain.per_seed[i] - scaled.per_seed[i]));
    }
    SuiteCheck out{"scaled_sign", "unit_scalings_reduce_to_plain", worst <= 1e-12, worst,
                   "max per-seed gap between unit-scaled and plain cosine"};
    out.seconds = watch.seconds();
    return out;
}

inline SuiteCheck check_scaled_lognormal(std::size_t m = 4096, std::size_t seeds = 100,
                                         std::uint64_t base_seed = 17) {
    suitedetail::Stopwatch watch;
    const ScalingLaw lognormal = [](CounterRng& rng) {
        auto draw = [&rng]() { return std::exp(0.5 * rng.next_gaussian()); };
        return std::array<double, 3>{draw(), draw(), draw()};
    };
    const MonteCarloCosine mc = scaled_sign_cosine(m, seeds, lognormal, base_seed);
    SuiteCheck out{"scaled_sign", "lognormal_scalings_stay_orthogonal",
                   std::abs(mc.mean) < 0.03, mc.mean,
                   "mean " + suitedetail::fmt(mc.mean) + ", std " +
                       suitedetail::fmt(mc.sample_std)};
    out.seconds = watch.seconds();
    return out;
}

inline SuiteCheck check_scaled_m1_collapse() {
    suitedetail::Stopwatch watch;
    double b1 = 0.0, c1 = 0.0;
    const ScalingLaw law = [&](CounterRng& rng) {
        const double a = 0.2 + rng.next_uniform();
        b1 = 0.2 + rng.next_uniform();
        c1 = 0.2 + rng.next_uniform();
        return std::array<double, 3>{a, b1, c1};
    };
    double worst = 0.0;
    for (std::size_t s = 0; s < 20; ++s) {
        const MonteCarloCosine mc = scaled_sign_cosine(1, 1, law, 1000 + s);
        const double expected = b1 / std::sqrt(b1 * b1 + c1 * c1);
        worst = std::max(worst, std::abs(std::abs(mc.per_seed[0]) - expected));
    }
    SuiteCheck out{"scaled_sign", "m1_collapses_to_b_over_bc", worst <= 1e-12, worst,
                   "max | |S| - b1/sqrt(b1^2+c1^2) | over 20 draws"};
    out.seconds = watch.seconds();
    return out;
}

struct NewtonScalingSetup {
    DenseMatrix hessian;
    DenseMatrix theta0;
    double alpha = 0.0;
    std::vector<double> eta_grid;
    double damping = 0.0;
};

inline NewtonScalingSetup default_quartic_setup(std::uint64_t seed = 29) {
    CounterRng rng(seed);
    NewtonScalingSetup s;
    s.hessian = random_spd_matrix(rng, 6, 0.5, 4.0);
    s.theta0 = suitedetail::random_unit_vector(rng, 6) * 2.0;
    s.alpha = 0.02;
    s.eta_grid = {0.4, 0.2, 0.1, 0.05};
    s.damping = 0.0;
    return s;
}

inline SuiteCheck check_newton_scaling_quadratic() {
    suitedetail::Stopwatch watch;
    NewtonScalingSetup s = default_quartic_setup();
    s.alpha = 0.0;
    const QuarticObjective obj{s.hessian, s.alpha};
    const InterstepScaling res =
        newton_interstep_scaling(obj, s.theta0, s.eta_grid, s.damping);
    double worst = 0.0;
    for (double v : res.one_minus_s) worst = std::max(worst, v);
    SuiteCheck out{"newton_scaling", "pure_quadratic_direction_constant", worst <= 1e-12,
                   worst, "max 1-S over the eta grid with no quartic term"};
    out.seconds = watch.seconds();
    return out;
}

inline SuiteCheck check_newton_scaling_quartic() {
    suitedetail::Stopwatch watch;
    const NewtonScalingSetup s = default_quartic_setup();
    const QuarticObjective obj{s.hessian, s.alpha};
    const InterstepScaling res =
        newton_interstep_scaling(obj, s.theta0, s.eta_grid, s.damping);
    bool ratios_ok = true;
    double min_ratio = 1e300;
    for (std::size_t i = 0; i + 1 < res.one_minus_s.size(); ++i) {
        const double ratio = res.one_minus_s[i] / res.one_minus_s[i + 1];
        min_ratio = std::min(min_ratio, ratio);
        if (ratio < 1.8) ratios_ok = false;
    }
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < res.one_minus_s.size(); ++i) {
        if (res.one_minus_s[i + 1] >= res.one_minus_s[i]) monotone = false;
    }
    const bool pass = ratios_ok && monotone && res.loglog_slope >= 0.9;
    SuiteCheck out{"newton_scaling", "quartic_decay_with_eta", pass, res.loglog_slope,
                   "log-log slope " + suitedetail::fmt(res.loglog_slope) +
                       ", min halving ratio " + suitedetail::fmt(min_ratio)};
    out.seconds = watch.seconds();
    return out;
}

struct KurtCompareSetup {
    std::size_t samples = 256;
    std::size_t channels = 8;
    std::size_t hidden = 16;
    double condition = 100.0;
    std::size_t steps = 200;
    std::size_t seeds = 20;
    double eta = 0.05;
    std::uint64_t base_seed = 41;
};

inline problems::FeatureGenerator make_generator(const KurtCompareSetup& s,
                                                 double condition,
                                                 std::uint64_t cov_seed = 77) {
    problems::FeatureGenerator gen;
    gen.samples = s.samples;
    gen.channels = s.channels;
    gen.hidden = s.hidden;
    gen.input_cov = problems::random_spd_with_condition(s.hidden, condition, cov_seed);
    gen.weights = DenseMatrix(s.hidden, s.channels);
    return gen;
}

inline SuiteCheck check_kurt_correlated(const KurtCompareSetup& s = {}) {
    suitedetail::Stopwatch watch;
    const auto gen = make_generator(s, s.condition);
    const KurtGrowth res = kurt_growth_compare(gen, s.steps, s.seeds, s.eta, s.base_seed);
    SuiteCheck out{"kurt_growth", "soap_grows_no_more_than_adam",
                   res.mean_soap <= res.mean_diag, res.mean_soap,
                   "mean dKurt soap " + suitedetail::fmt(res.mean_soap) + " vs adam " +
                       suitedetail::fmt(res.mean_diag) + " (cond " +
                       suitedetail::fmt(s.condition) + ")"};
    out.seconds = watch.seconds();
    return out;
}

inline SuiteCheck check_kurt_isotropic_null(const KurtCompareSetup& base = {}) {
    suitedetail::Stopwatch watch;
    KurtCompareSetup s = base;
    s.steps = 1;
    s.seeds = 40;
    const auto gen = make_generator(s, 1.0);
    const KurtGrowth res = kurt_growth_compare(gen, s.steps, s.seeds, s.eta, s.base_seed);
    double var = 0.0;
    const double diff_mean = res.mean_soap - res.mean_diag;
    for (std::size_t i = 0; i < res.delta_soap.size(); ++i) {
        const double d = res.delta_soap[i] - res.delta_diag[i] - diff_mean;
        var += d * d;
    }
    var /= static_cast<double>(res.delta_soap.size() - 1);
    const double se = std::sqrt(var / static_cast<double>(res.delta_soap.size()));
    const bool pass = std::abs(diff_mean) < 3.0 * se + 1e-12;
    SuiteCheck out{"kurt_growth", "isotropic_one_step_null", pass, diff_mean,
                   "mean paired gap " + suitedetail::fmt(diff_mean) + ", se " +
                       suitedetail::fmt(se)};
    out.seconds = watch.seconds();
    return out;
}

inline SuiteCheck check_kurt_zero_lr(const KurtCompareSetup& base = {}) {
    suitedetail::Stopwatch watch;
    KurtCompareSetup s = base;
    s.steps = 5;
    s.seeds = 3;
    s.eta = 0.0;
    const auto gen = make_generator(s, s.condition);
    const KurtGrowth res = kurt_growth_compare(gen, s.steps, s.seeds, s.eta, s.base_seed);
    const bool pass = res.mean_soap == 0.0 && res.mean_diag == 0.0;
    SuiteCheck out{"kurt_growth", "zero_lr_no_growth", pass, res.mean_soap,
                   "both cumulative changes must be exactly zero"};
    out.seconds = watch.seconds();
    return out;
}

inline std::vector<SuiteCheck> run_suite(const std::string& name = "") {
    std::vector<SuiteCheck> checks;
    auto want = [&](const char* suite) { return name.empty() || name == suite; };
    if (want("adam_cosine")) {
        checks.push_back(check_adam_closed_form());
        checks.push_back(check_flip_flop());
        checks.push_back(check_taylor_surrogate());
    }
    if (want("rho_adam")) {
        checks.push_back(check_rho_rotated_negative());
        checks.push_back(check_rho_joint_diagonal());
        checks.push_back(check_rho_proportional_one());
    }
    if (want("slln")) {
        checks.push_back(check_slln_orthogonality());
        checks.push_back(check_slln_end_to_end());
    }
    if (want("scaled_sign")) {
        checks.push_back(check_scaled_ones_reduces());
        checks.push_back(check_scaled_lognormal());
        checks.push_back(check_scaled_m1_collapse());
    }
    if (want("newton_scaling")) {
        checks.push_back(check_newton_scaling_quadratic());
        checks.push_back(check_newton_scaling_quartic());
    }
    if (want("kurt_growth")) {
        checks.push_back(check_kurt_isotropic_null());
        checks.push_back(check_kurt_correlated());
        checks.push_back(check_kurt_zero_lr());
    }
    return checks;
}

inline std::string suite_csv(const std::vector<SuiteCheck>& checks) {
    std::string out = "suite,check,pass,value,seconds,detail\n";
    for (const auto& c : checks) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.10g", c.value);
        std::string detail = c.detail;
        for (char& ch : detail) {
            if (ch == ',') ch = ';';
        }
        out += c.suite + "," + c.name + "," + (c.pass ? "1" : "0") + "," + buf + ",";
        std::snprintf(buf, sizeof(buf), "%.3f", c.seconds);
        out += std::string(buf) + "," + detail + "\n";
    }
    return out;
}

}  // namespace rdlab::oracles

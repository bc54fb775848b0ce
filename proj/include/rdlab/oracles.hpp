// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rdlab/dense.hpp"
#include "rdlab/diagnostics.hpp"
#include "rdlab/optim.hpp"
#include "rdlab/problems.hpp"
#include "rdlab/rng.hpp"

namespace rdlab::oracles {

/// Frozen-preconditioner quadratic in whitened coordinates:
/// B = c D^{-1/2} H D^{-1/2}, updates follow q_{t+1} = (I - eta B) q_t.
struct WhitenedQuadratic {
    DenseMatrix b_matrix;        // SPD
    std::vector<double> d_diag;  // positive diagonal of D
    double lr = 0.0;             // eta
};

struct InterCosine {
    double exact = 0.0;
    double taylor = 0.0;  // 1 - eta^2 Var_u(B) / 2
};

/// Closed-form inter-step cosine of diagonally preconditioned descent on
/// a quadratic, evaluated at unit direction u:
///   S = (1 - eta mu1) / sqrt(1 - 2 eta mu1 + eta^2 mu2),
/// with mu1 = u^T B u and mu2 = u^T B^2 u.
inline InterCosine adam_inter_cosine_exact(const WhitenedQuadratic& inst,
                                           const DenseMatrix& u) {
    if (u.cols() != 1 || u.rows() != inst.b_matrix.rows()) {
        throw std::invalid_argument("adam_inter_cosine_exact: direction shape mismatch");
    }
    if (std::abs(u.frobenius_norm() - 1.0) > 1e-8) {
        throw std::invalid_argument("adam_inter_cosine_exact: direction must be unit length");
    }
    const DenseMatrix bu = matmul(inst.b_matrix, u);
    const double mu1 = dot(u, bu);
    const double mu2 = dot(bu, bu);
    const double eta = inst.lr;
    const double denom_sq = 1.0 - 2.0 * eta * mu1 + eta * eta * mu2;
    if (denom_sq <= 0.0) {
        throw std::invalid_argument("adam_inter_cosine_exact: degenerate denominator");
    }
    InterCosine out;
    out.exact = (1.0 - eta * mu1) / std::sqrt(denom_sq);
    out.taylor = 1.0 - 0.5 * eta * eta * (mu2 - mu1 * mu1);
    return out;
}

struct IntraLimitInstance {
    DenseMatrix h_r;             // SPD
    DenseMatrix h_d;             // SPD
    std::vector<double> d_diag;  // positive diagonal of D
    DenseMatrix direction;       // unit vector u
};

/// Exact limit of the intra-step cosine under a fixed diagonal
/// preconditioner: cos(D^{-1} H_R u, D^{-1} H_D u).
inline double rho_adam(const IntraLimitInstance& inst) {
    const std::size_t n = inst.direction.rows();
    if (inst.d_diag.size() != n || inst.h_r.rows() != n || inst.h_d.rows() != n) {
        throw std::invalid_argument("rho_adam: dimension mismatch");
    }
    auto mapped = [&](const DenseMatrix& h) {
        DenseMatrix v = matmul(h, inst.direction);
        for (std::size_t i = 0; i < n; ++i) {
            if (inst.d_diag[i] <= 0.0) {
                throw std::invalid_argument("rho_adam: D must have positive diagonal");
            }
            v(i, 0) /= inst.d_diag[i];
        }
        return v;
    };
    const DenseMatrix a = mapped(inst.h_r);
    const DenseMatrix b = mapped(inst.h_d);
    if (a.frobenius_norm() < 1e-300 || b.frobenius_norm() < 1e-300) {
        throw std::invalid_argument("rho_adam: degenerate image vector");
    }
    return diag::cosine(a, b).value;
}

/// -(1/(M sqrt 2)) sum_i sign(w_e,i * w_d,i): the sign-step intra cosine
/// of the linear autoencoder at small init, as a function of the drawn
/// weights only.
inline double sign_cosine_formula(const DenseMatrix& w_e, const DenseMatrix& w_d) {
    if (!w_e.same_shape(w_d) || w_e.cols() != 1) {
        throw std::invalid_argument("sign_cosine_formula: weight shape mismatch");
    }
    const double m = static_cast<double>(w_e.rows());
    double s = 0.0;
    for (std::size_t i = 0; i < w_e.rows(); ++i) {
        s += rdlab::sign(w_e(i, 0) * w_d(i, 0));
    }
    return -s / (m * std::sqrt(2.0));
}

struct MonteCarloCosine {
    double mean = 0.0;
    double sample_std = 0.0;  // ddof = 1
    std::vector<double> per_seed;
};

namespace detail {

inline MonteCarloCosine summarize(std::vector<double> values) {
    MonteCarloCosine out;
    const double n = static_cast<double>(values.size());
    for (double v : values) out.mean += v;
    out.mean /= n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.sample_std = std::sqrt(ss / (n - 1.0));
    }
    out.per_seed = std::move(values);
    return out;
}

}  // namespace detail

/// Monte Carlo over i.i.d. Gaussian weight draws of the exact sign-step
/// cosine. The analytic reference: mean 0, variance 1/(2M). Seed i of
/// the batch draws with key base_seed + i, matching
/// LinearAERD::random_init stream order.
inline MonteCarloCosine slln_sign_cosine(std::size_t m, std::size_t n_seeds,
                                         std::uint64_t base_seed = 0) {
    if (m < 1 || n_seeds < 1) {
        throw std::invalid_argument("slln_sign_cosine: m and seeds must be >= 1");
    }
    std::vector<double> values;
    values.reserve(n_seeds);
    for (std::size_t i = 0; i < n_seeds; ++i) {
        CounterRng rng(base_seed + i);
        const DenseMatrix w_e = random_gaussian(rng, m, 1);
        const DenseMatrix w_d = random_gaussian(rng, m, 1);
        values.push_back(sign_cosine_formula(w_e, w_d));
    }
    return detail::summarize(std::move(values));
}

/// Draws one positive (a_i, b_i, c_i) triple per latent coordinate.
using ScalingLaw = std::function<std::array<double, 3>(CounterRng&)>;

/// Generalized sign cosine under positive, sign-independent coordinate
/// scalings:
///   S = -(1/M sum a_i b_i s_i) / sqrt((1/M sum a_i^2)(1/M sum b_i^2+c_i^2)).
inline MonteCarloCosine scaled_sign_cosine(std::size_t m, std::size_t n_seeds,
                                           const ScalingLaw& law,
                                           std::uint64_t base_seed = 0) {
    if (m < 1 || n_seeds < 1) {
        throw std::invalid_argument("scaled_sign_cosine: m and seeds must be >= 1");
    }
    std::vector<double> values;
    values.reserve(n_seeds);
    for (std::size_t i = 0; i < n_seeds; ++i) {
        CounterRng rng(base_seed + i);
        const DenseMatrix w_e = random_gaussian(rng, m, 1);
        const DenseMatrix w_d = random_gaussian(rng, m, 1);
        CounterRng scaling_rng = rng.fork(0x5ca1ab1e);
        double num = 0.0;
        double sum_a2 = 0.0;
        double sum_bc2 = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const std::array<double, 3> abc = law(scaling_rng);
            if (abc[0] <= 0.0 || abc[1] <= 0.0 || abc[2] <= 0.0) {
                throw std::invalid_argument("scaled_sign_cosine: scalings must be positive");
            }
            const double s = rdlab::sign(w_e(k, 0) * w_d(k, 0));
            num += abc[0] * abc[1] * s;
            sum_a2 += abc[0] * abc[0];
            sum_bc2 += abc[1] * abc[1] + abc[2] * abc[2];
        }
        const double mm = static_cast<double>(m);
        values.push_back(-(num / mm) / std::sqrt((sum_a2 / mm) * (sum_bc2 / mm)));
    }
    return detail::summarize(std::move(values));
}

/// Quadratic bowl with a small quartic perturbation,
/// f(theta) = 0.5 theta^T H theta + alpha sum_i theta_i^4; its Hessian
/// H + 12 alpha diag(theta^2) is Lipschitz along bounded trajectories.
struct QuarticObjective {
    DenseMatrix hessian;
    double alpha = 0.0;

    double value(const DenseMatrix& theta) const {
        double quartic = 0.0;
        for (double v : theta.data()) quartic += v * v * v * v;
        return 0.5 * dot(theta, matmul(hessian, theta)) + alpha * quartic;
    }

    DenseMatrix grad(const DenseMatrix& theta) const {
        DenseMatrix g = matmul(hessian, theta);
        for (std::size_t i = 0; i < theta.rows(); ++i) {
            const double v = theta(i, 0);
            g(i, 0) += 4.0 * alpha * v * v * v;
        }
        return g;
    }

    DenseMatrix hess(const DenseMatrix& theta) const {
        DenseMatrix h = hessian;
        for (std::size_t i = 0; i < theta.rows(); ++i) {
            h(i, i) += 12.0 * alpha * theta(i, 0) * theta(i, 0);
        }
        return h;
    }
};

struct InterstepScaling {
    std::vector<double> etas;
    std::vector<double> one_minus_s;
    double loglog_slope = 0.0;
};

/// Measures 1 - S(p_0, p_1) of damped Newton on a smooth non-quadratic
/// across a learning-rate grid, from a common starting point, and fits
/// the log-log decay slope. Verifies the scaling law, not the constants.
inline InterstepScaling newton_interstep_scaling(const QuarticObjective& obj,
                                                 const DenseMatrix& theta0,
                                                 const std::vector<double>& eta_grid,
                                                 double damping) {
    if (eta_grid.empty()) {
        throw std::invalid_argument("newton_interstep_scaling: empty grid");
    }
    InterstepScaling out;
    const DenseMatrix g0 = obj.grad(theta0);
    const DenseMatrix p0 =
        optim::exact_newton_step(obj.hess(theta0), g0, {1.0}, damping);
    const double f0 = obj.value(theta0);
    for (const double eta : eta_grid) {
        if (eta <= 0.0) {
            throw std::invalid_argument("newton_interstep_scaling: eta must be positive");
        }
        const DenseMatrix theta1 = theta0 + eta * p0;
        if (obj.value(theta1) >= f0) {
            throw std::runtime_error("newton_interstep_scaling: non-descent trajectory");
        }
        const DenseMatrix p1 =
            optim::exact_newton_step(obj.hess(theta1), obj.grad(theta1), {1.0}, damping);
        out.etas.push_back(eta);
        out.one_minus_s.push_back(1.0 - diag::cosine(p0, p1).value);
    }
    // Least-squares slope of log(1 - S) against log(eta).
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(out.etas.size());
    for (std::size_t i = 0; i < out.etas.size(); ++i) {
        const double x = std::log(out.etas[i]);
        const double y = std::log(std::max(out.one_minus_s[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    out.loglog_slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    return out;
}

struct KurtGrowth {
    std::vector<double> delta_soap;  // per-seed cumulative kurtosis change
    std::vector<double> delta_diag;
    double mean_soap = 0.0;
    double mean_diag = 0.0;
};

/// Paired per-step kurtosis-growth comparison on the decode-regression
/// loss of X = H W. A plain gradient-descent carrier walks the shared
/// trajectory on fresh minibatches; both optimizer states are warmed
/// with the same gradients, and at every carrier state each proposes one
/// step. The proposals are rescaled to a common norm (the smaller of the
/// two, matching the equal-preconditioner-scale condition) and their
/// one-step kurtosis changes on a held-out evaluation set accumulate
/// into the per-seed totals.
inline KurtGrowth kurt_growth_compare(const problems::FeatureGenerator& gen,
                                      std::size_t steps, std::size_t n_seeds, double eta,
                                      std::uint64_t base_seed = 0,
                                      std::size_t batch_size = 32) {
    if (n_seeds < 1) {
        throw std::invalid_argument("kurt_growth_compare: seeds must be >= 1");
    }
    if (eta < 0.0) {
        throw std::invalid_argument("kurt_growth_compare: eta must be nonnegative");
    }
    KurtGrowth out;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        CounterRng seed_rng(base_seed + s);
        CounterRng h_rng = seed_rng.fork(0);
        CounterRng w_rng = seed_rng.fork(1);
        CounterRng dec_rng = seed_rng.fork(2);
        CounterRng batch_rng = seed_rng.fork(3);

        const DenseMatrix h_eval = gen.sample_hidden(gen.samples, h_rng.next_u64());
        const DenseMatrix w0 = random_gaussian(
            w_rng, gen.hidden, gen.channels, 1.0 / std::sqrt(static_cast<double>(gen.hidden)));
        const DenseMatrix decode = random_gaussian(
            dec_rng, gen.channels, gen.hidden,
            1.0 / std::sqrt(static_cast<double>(gen.channels)));

        auto grad_on = [&](const DenseMatrix& h, const DenseMatrix& w) {
            const double n = static_cast<double>(h.rows());
            const DenseMatrix resid = matmul(matmul(h, w), decode) - h;
            DenseMatrix g = matmul(h.transpose(), matmul(resid, decode.transpose()));
            g *= 1.0 / n;
            return g;
        };

        // Carrier step chosen inside the stability region of this instance.
        const double l_h =
            sym_eig(matmul(h_eval.transpose(), h_eval) *
                    (1.0 / static_cast<double>(h_eval.rows())))
                .eigenvalues.back();
        const double l_dec = sym_eig(matmul(decode, decode.transpose())).eigenvalues.back();
        const double lr_carrier = 0.5 / (l_h * l_dec);

        optim::SoapOptimizer soap;
        optim::AdamOptimizer adam;
        optim::SgdOptimizer carrier;
        DenseMatrix w = w0;
        double cum_soap = 0.0;
        double cum_diag = 0.0;
        for (std::size_t t = 0; t < steps && eta > 0.0; ++t) {
            const DenseMatrix h_batch = gen.sample_hidden(batch_size, batch_rng.next_u64());
            const optim::Blocks g{grad_on(h_batch, w)};

            optim::Params soap_scratch{{"w", w}};
            optim::Params adam_scratch{{"w", w}};
            const optim::Blocks u_soap = soap.step(soap_scratch, g, {eta});
            const optim::Blocks u_adam = adam.step(adam_scratch, g, {eta});
            const double norm_soap = u_soap[0].frobenius_norm();
            const double norm_adam = u_adam[0].frobenius_norm();
            const double shared = std::min(norm_soap, norm_adam);
            if (shared > 0.0) {
                const double k_now = diag::kurt(gen.features(h_eval, w));
                cum_soap +=
                    diag::kurt(gen.features(h_eval, w + u_soap[0] * (shared / norm_soap))) -
                    k_now;
                cum_diag +=
                    diag::kurt(gen.features(h_eval, w + u_adam[0] * (shared / norm_adam))) -
                    k_now;
            }

            optim::Params carrier_params{{"w", w}};
            carrier.step(carrier_params, g, {lr_carrier});
            w = carrier_params[0].value;
        }

        out.delta_soap.push_back(cum_soap);
        out.delta_diag.push_back(cum_diag);
        out.mean_soap += cum_soap;
        out.mean_diag += cum_diag;
    }
    out.mean_soap /= static_cast<double>(n_seeds);
    out.mean_diag /= static_cast<double>(n_seeds);
    return out;
}

}  // namespace rdlab::oracles

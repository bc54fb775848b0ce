// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include "rdlab/dense.hpp"
#include "rdlab/eig.hpp"
#include "rdlab/rng.hpp"

namespace rdlab::problems {

struct Losses {
    double total = 0.0;
    double rate = 0.0;
    double dist = 0.0;
};

/// Draw n rows from N(0, cov) through the symmetric square root of the
/// covariance. Pure function of (cov, n, seed).
inline DenseMatrix sample_gaussian_rows(const DenseMatrix& cov, std::size_t n,
                                        std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("sample_gaussian_rows: n must be >= 1");
    }
    const DenseMatrix sqrt_cov = spd_inv_power(cov, -0.5, 0.0);
    CounterRng rng(seed);
    DenseMatrix z = random_gaussian(rng, n, cov.rows());
    return matmul(z, sqrt_cov);
}

/// 0.5 (theta - anchor)^T H (theta - anchor). Single-term objective:
/// the whole loss is reported as the rate part.
struct QuadraticObjective {
    DenseMatrix hessian;  // SPD
    DenseMatrix anchor;   // n x 1

    std::size_t dim() const { return anchor.rows(); }

    void check_theta(const DenseMatrix& theta) const {
        if (theta.rows() != dim() || theta.cols() != 1) {
            throw std::invalid_argument("QuadraticObjective: theta shape mismatch");
        }
    }

    Losses loss(const DenseMatrix& theta) const {
        check_theta(theta);
        const DenseMatrix e = theta - anchor;
        const double v = 0.5 * dot(e, matmul(hessian, e));
        return {v, v, 0.0};
    }

    DenseMatrix grad(const DenseMatrix& theta) const {
        check_theta(theta);
        return matmul(hessian, theta - anchor);
    }

    DenseMatrix exact_hessian() const { return hessian; }
};

/// Two quadratic bowls with separate anchors:
///   rate = 0.5 (theta - anchor_r)^T H_R (theta - anchor_r)
///   dist = 0.5 (theta - anchor_d)^T H_D (theta - anchor_d)
///   total = rate + lambda * dist
/// Conflict exists whenever the anchors differ; a shared anchor is the
/// aligned special case.
struct BiQuadraticRD {
    DenseMatrix hessian_r;  // PSD
    DenseMatrix hessian_d;  // PSD
    DenseMatrix anchor_r;
    DenseMatrix anchor_d;
    double lambda = 1.0;  // >= 0; H_R + lambda H_D must stay PD

    std::size_t dim() const { return anchor_r.rows(); }

    void check_theta(const DenseMatrix& theta) const {
        if (theta.rows() != dim() || theta.cols() != 1) {
            throw std::invalid_argument("BiQuadraticRD: theta shape mismatch");
        }
    }

    Losses loss(const DenseMatrix& theta) const {
        check_theta(theta);
        const DenseMatrix er = theta - anchor_r;
        const DenseMatrix ed = theta - anchor_d;
        const double rate = 0.5 * dot(er, matmul(hessian_r, er));
        const double dist = 0.5 * dot(ed, matmul(hessian_d, ed));
        return {rate + lambda * dist, rate, dist};
    }

    std::pair<DenseMatrix, DenseMatrix> grad_components(const DenseMatrix& theta) const {
        check_theta(theta);
        return {matmul(hessian_r, theta - anchor_r), matmul(hessian_d, theta - anchor_d)};
    }

    DenseMatrix grad(const DenseMatrix& theta) const {
        auto [gr, gd] = grad_components(theta);
        return gr + lambda * gd;
    }

    DenseMatrix exact_hessian() const { return hessian_r + lambda * hessian_d; }
};

/// Scalar-input linear autoencoder with latent width M and x ~ U[-1,1]:
///   dist = C (w_d . w_e - 1)^2, rate = C ||w_e||^2, total = dist + lambda * rate
/// with C = E[x^2] = 1/3 exactly. Closed-form expectations, no sampling.
struct LinearAERD {
    static constexpr double kInputSecondMoment = 1.0 / 3.0;  // C

    std::size_t latent_dim = 0;  // M
    double init_scale = 1e-2;    // entry stddev used by random_init
    double lambda = 0.0;
    DenseMatrix w_e;  // M x 1
    DenseMatrix w_d;  // M x 1

    static LinearAERD random_init(std::size_t latent_dim, double init_scale, double lambda,
                                  std::uint64_t seed) {
        if (latent_dim < 1) {
            throw std::invalid_argument("LinearAERD: latent_dim must be >= 1");
        }
        if (init_scale <= 0.0) {
            throw std::invalid_argument("LinearAERD: init_scale must be positive");
        }
        CounterRng rng(seed);
        LinearAERD ae;
        ae.latent_dim = latent_dim;
        ae.init_scale = init_scale;
        ae.lambda = lambda;
        ae.w_e = random_gaussian(rng, latent_dim, 1, init_scale);
        ae.w_d = random_gaussian(rng, latent_dim, 1, init_scale);
        return ae;
    }

    void check_params(const DenseMatrix& we, const DenseMatrix& wd) const {
        if (we.rows() != latent_dim || we.cols() != 1 || wd.rows() != latent_dim ||
            wd.cols() != 1) {
            throw std::invalid_argument("LinearAERD: weight shape mismatch");
        }
    }

    Losses loss(const DenseMatrix& we, const DenseMatrix& wd) const {
        check_params(we, wd);
        const double c = kInputSecondMoment;
        const double fit = dot(wd, we) - 1.0;
        const double dist = c * fit * fit;
        const double rate = c * dot(we, we);
        return {dist + lambda * rate, rate, dist};
    }

    Losses loss() const { return loss(w_e, w_d); }

    struct Grads {
        DenseMatrix e;  // d/dw_e
        DenseMatrix d;  // d/dw_d
    };

    Grads grad_rate(const DenseMatrix& we, const DenseMatrix& wd) const {
        check_params(we, wd);
        const double c = kInputSecondMoment;
        return {2.0 * c * we, DenseMatrix(latent_dim, 1)};
    }

    Grads grad_dist(const DenseMatrix& we, const DenseMatrix& wd) const {
        check_params(we, wd);
        const double c = kInputSecondMoment;
        const double fit = dot(wd, we) - 1.0;
        return {2.0 * c * fit * wd, 2.0 * c * fit * we};
    }

    Grads grad_total(const DenseMatrix& we, const DenseMatrix& wd) const {
        const Grads r = grad_rate(we, wd);
        const Grads d = grad_dist(we, wd);
        return {d.e + lambda * r.e, d.d + lambda * r.d};
    }
};

/// Matrix autoencoder on Gaussian inputs, the batched generalization of
/// LinearAERD. Batch rows are samples; Z = B enc^T, Xhat = Z dec^T.
///   dist = ||Xhat - B||_F^2 / n, rate = ||Z||_F^2 / n,
///   total = dist + lambda * rate.
struct TwoLayerNetRD {
    DenseMatrix enc;        // m x d
    DenseMatrix dec;        // d x m
    DenseMatrix input_cov;  // d x d SPD
    double lambda = 0.0;
    std::size_t batch_size = 64;

    std::size_t input_dim() const { return enc.cols(); }
    std::size_t latent_dim() const { return enc.rows(); }

    void check_shapes(const DenseMatrix& w_enc, const DenseMatrix& w_dec,
                      const DenseMatrix& batch) const {
        if (w_enc.rows() != latent_dim() || w_enc.cols() != input_dim()) {
            throw std::invalid_argument("TwoLayerNetRD: encoder shape mismatch");
        }
        if (w_dec.rows() != input_dim() || w_dec.cols() != latent_dim()) {
            throw std::invalid_argument("TwoLayerNetRD: decoder shape mismatch");
        }
        if (batch.cols() != input_dim() || batch.rows() < 1) {
            throw std::invalid_argument("TwoLayerNetRD: batch shape mismatch");
        }
    }

    DenseMatrix sample_batch(std::size_t n, std::uint64_t seed) const {
        return sample_gaussian_rows(input_cov, n, seed);
    }

    DenseMatrix latent(const DenseMatrix& w_enc, const DenseMatrix& batch) const {
        return matmul(batch, w_enc.transpose());
    }

    Losses loss(const DenseMatrix& w_enc, const DenseMatrix& w_dec,
                const DenseMatrix& batch) const {
        check_shapes(w_enc, w_dec, batch);
        const double n = static_cast<double>(batch.rows());
        const DenseMatrix z = latent(w_enc, batch);
        const DenseMatrix resid = matmul(z, w_dec.transpose()) - batch;
        const double rate = dot(z, z) / n;
        const double dist = dot(resid, resid) / n;
        return {dist + lambda * rate, rate, dist};
    }

    Losses loss(const DenseMatrix& batch) const { return loss(enc, dec, batch); }

    struct Grads {
        DenseMatrix enc;
        DenseMatrix dec;
    };

    Grads grad_rate(const DenseMatrix& w_enc, const DenseMatrix& w_dec,
                    const DenseMatrix& batch) const {
        check_shapes(w_enc, w_dec, batch);
        const double n = static_cast<double>(batch.rows());
        const DenseMatrix z = latent(w_enc, batch);
        DenseMatrix ge = matmul(z.transpose(), batch);
        ge *= 2.0 / n;
        return {std::move(ge), DenseMatrix(input_dim(), latent_dim())};
    }

    Grads grad_dist(const DenseMatrix& w_enc, const DenseMatrix& w_dec,
                    const DenseMatrix& batch) const {
        check_shapes(w_enc, w_dec, batch);
        const double n = static_cast<double>(batch.rows());
        const DenseMatrix z = latent(w_enc, batch);
        const DenseMatrix resid = matmul(z, w_dec.transpose()) - batch;
        DenseMatrix gd = matmul(resid.transpose(), z);
        gd *= 2.0 / n;
        DenseMatrix ge = matmul(w_dec.transpose(), matmul(resid.transpose(), batch));
        ge *= 2.0 / n;
        return {std::move(ge), std::move(gd)};
    }

    Grads grad_total(const DenseMatrix& w_enc, const DenseMatrix& w_dec,
                     const DenseMatrix& batch) const {
        const Grads r = grad_rate(w_enc, w_dec, batch);
        const Grads d = grad_dist(w_enc, w_dec, batch);
        return {d.enc + lambda * r.enc, d.dec + lambda * r.dec};
    }
};

/// Empirical second-moment Kronecker factors of one layer:
/// l = mean of sensitivity outer products, r = mean of activation outer
/// products. Sensitivities are taken from the per-sample total loss
/// ||xhat - x||^2 + lambda ||z||^2.
struct KronFactors {
    DenseMatrix l;
    DenseMatrix r;
};

struct LayerFactors {
    KronFactors encoder;
    KronFactors decoder;
};

inline LayerFactors capture_kron_factors(const TwoLayerNetRD& net, const DenseMatrix& w_enc,
                                         const DenseMatrix& w_dec, const DenseMatrix& batch) {
    net.check_shapes(w_enc, w_dec, batch);
    const double n = static_cast<double>(batch.rows());
    const DenseMatrix z = net.latent(w_enc, batch);             // n x m
    const DenseMatrix resid = matmul(z, w_dec.transpose()) - batch;  // n x d

    // Rows of these matrices are the per-sample sensitivities.
    DenseMatrix delta_dec = 2.0 * resid;                                     // n x d
    DenseMatrix delta_enc = 2.0 * matmul(resid, w_dec) + (2.0 * net.lambda) * z;  // n x m

    auto second_moment = [n](const DenseMatrix& rows) {
        DenseMatrix m = matmul(rows.transpose(), rows);
        m *= 1.0 / n;
        return m;
    };

    LayerFactors out;
    out.encoder = {second_moment(delta_enc), second_moment(batch)};
    out.decoder = {second_moment(delta_dec), second_moment(z)};
    return out;
}

inline LayerFactors capture_kron_factors(const TwoLayerNetRD& net, const DenseMatrix& batch) {
    return capture_kron_factors(net, net.enc, net.dec, batch);
}

/// Data source for the feature-statistics experiments: hidden rows
/// H ~ N(0, input_cov), features X = H W.
struct FeatureGenerator {
    std::size_t samples = 0;   // n
    std::size_t channels = 0;  // d
    std::size_t hidden = 0;    // h
    DenseMatrix input_cov;     // h x h SPD
    DenseMatrix weights;       // h x d

    DenseMatrix sample_hidden(std::size_t n, std::uint64_t seed) const {
        return sample_gaussian_rows(input_cov, n, seed);
    }

    DenseMatrix features(const DenseMatrix& hidden_rows, const DenseMatrix& w) const {
        return matmul(hidden_rows, w);
    }
};

/// Rotated log-spaced SPD matrix with the requested condition number.
/// Deterministic in seed; used to build correlated input covariances.
inline DenseMatrix random_spd_with_condition(std::size_t n, double condition,
                                             std::uint64_t seed) {
    if (condition < 1.0) {
        throw std::invalid_argument("random_spd_with_condition: condition must be >= 1");
    }
    CounterRng rng(seed);
    const DenseMatrix g = random_gaussian(rng, n, n);
    DenseMatrix sym(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            sym(i, j) = 0.5 * (g(i, j) + g(j, i));
    const SymEig eig = sym_eig(sym);
    const DenseMatrix& q = eig.eigenvectors;
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double expo =
                    (n == 1) ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
                const double lam = std::pow(condition, expo);
                s += q(i, k) * lam * q(j, k);
            }
            out(i, j) = s;
        }
    return out;
}

}  // namespace rdlab::problems

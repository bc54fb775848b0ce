// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdlab/dense.hpp"

namespace rdlab::diag {

struct CosineScore {
    double value = 0.0;
};

/// Concatenate named blocks into one column vector, ordered by block id.
/// The order is arbitrary but must stay fixed so that inter-step cosines
/// compare like with like.
inline DenseMatrix flatten_blocks(const std::vector<std::pair<std::string, DenseMatrix>>& blocks) {
    if (blocks.empty()) {
        throw std::invalid_argument("flatten_blocks: no blocks");
    }
    std::map<std::string, const DenseMatrix*> ordered;
    for (const auto& [id, m] : blocks) {
        if (!ordered.emplace(id, &m).second) {
            throw std::invalid_argument("flatten_blocks: duplicate block id '" + id + "'");
        }
    }
    std::size_t total = 0;
    for (const auto& [id, m] : ordered) total += m->size();
    DenseMatrix out(total, 1);
    std::size_t k = 0;
    for (const auto& [id, m] : ordered) {
        for (double v : m->data()) out(k++, 0) = v;
    }
    return out;
}

inline CosineScore cosine(const DenseMatrix& u, const DenseMatrix& v) {
    if (!u.same_shape(v)) {
        throw std::invalid_argument("cosine: shape mismatch");
    }
    const double nu = u.frobenius_norm();
    const double nv = v.frobenius_norm();
    if (nu == 0.0 || nv == 0.0) {
        throw std::invalid_argument("cosine: undefined for a zero vector");
    }
    double score = dot(u, v) / (nu * nv);
    score = std::clamp(score, -1.0, 1.0);
    return {score};
}

/// Alignment of the rate and distortion update vectors within one step.
inline CosineScore intra_step(const DenseMatrix& p_r, const DenseMatrix& p_d) {
    return cosine(p_r, p_d);
}

/// Alignment of consecutive total update vectors.
inline CosineScore inter_step(const DenseMatrix& p_prev, const DenseMatrix& p_cur) {
    return cosine(p_prev, p_cur);
}

/// Rescale so the second moment (1/nd)||x||_F^2 equals one.
inline DenseMatrix normalize_m2(const DenseMatrix& x) {
    double sum_sq = 0.0;
    for (double v : x.data()) sum_sq += v * v;
    if (sum_sq == 0.0) {
        throw std::invalid_argument("normalize_m2: zero matrix");
    }
    const double m2 = sum_sq / static_cast<double>(x.size());
    return x * (1.0 / std::sqrt(m2));
}

/// Kurtosis of per-channel RMS energies (channels are columns).
/// Scale-invariant; equals 1 exactly when all channel energies agree.
inline double kurt(const DenseMatrix& x) {
    if (x.frobenius_norm() == 0.0) {
        throw std::invalid_argument("kurt: zero matrix");
    }
    const double n = static_cast<double>(x.rows());
    const double d = static_cast<double>(x.cols());
    double sum_s2 = 0.0;
    double sum_s4 = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s2 = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) s2 += x(i, j) * x(i, j);
        s2 /= n;
        sum_s2 += s2;
        sum_s4 += s2 * s2;
    }
    const double mean_s2 = sum_s2 / d;
    return (sum_s4 / d) / (mean_s2 * mean_s2);
}

/// Mean over rows of (max |entry| / median |entry|). The median of an
/// even channel count is the average of the two central order
/// statistics. A zero-median row is an error so downstream logs stay
/// finite.
inline double maxmed(const DenseMatrix& x) {
    const double n = static_cast<double>(x.rows());
    double total = 0.0;
    std::vector<double> row(x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) row[j] = std::abs(x(i, j));
        const double mx = *std::max_element(row.begin(), row.end());
        std::sort(row.begin(), row.end());
        const std::size_t d = row.size();
        const double med =
            (d % 2 == 1) ? row[d / 2] : 0.5 * (row[d / 2 - 1] + row[d / 2]);
        if (med == 0.0) {
            throw std::invalid_argument("maxmed: degenerate row " + std::to_string(i) +
                                        " with zero median");
        }
        total += mx / med;
    }
    return total / n;
}

/// Both sides of the feature/input Gram energy identity, evaluated on
/// the m2-normalized matrix: the diagonal (kurtosis) term plus the
/// off-diagonal cross-channel term must equal the total input
/// correlation energy.
struct TraceIdentity {
    double diag_term = 0.0;
    double offdiag_term = 0.0;
    double input_energy = 0.0;
    double residual = 0.0;
};

inline TraceIdentity trace_identity(const DenseMatrix& x) {
    const DenseMatrix xn = normalize_m2(x);
    const double n = static_cast<double>(xn.rows());
    const double d = static_cast<double>(xn.cols());

    TraceIdentity out;
    out.diag_term = n * n * d * kurt(xn);

    const DenseMatrix sigma_f = matmul(xn.transpose(), xn);
    for (std::size_t i = 0; i < sigma_f.rows(); ++i)
        for (std::size_t j = 0; j < sigma_f.cols(); ++j)
            if (i != j) out.offdiag_term += sigma_f(i, j) * sigma_f(i, j);

    const DenseMatrix sigma_i = matmul(xn, xn.transpose());
    for (double v : sigma_i.data()) out.input_energy += v * v;

    out.residual = std::abs(out.diag_term + out.offdiag_term - out.input_energy) /
                   out.input_energy;
    return out;
}

/// Entrywise |yhat - y| / sum|y|. The normalizer uses absolute values so
/// it cannot vanish or flip sign for zero-mean latents.
inline DenseMatrix scaled_deviation(const DenseMatrix& y, const DenseMatrix& y_hat) {
    if (!y.same_shape(y_hat)) {
        throw std::invalid_argument("scaled_deviation: shape mismatch");
    }
    double denom = 0.0;
    for (double v : y.data()) denom += std::abs(v);
    if (denom == 0.0) {
        throw std::invalid_argument("scaled_deviation: zero normalizer");
    }
    return cwise(y_hat, y, [&](double yh, double yy) { return std::abs(yh - yy) / denom; });
}

struct DescentBoundParams {
    double smoothness = 0.0;  // L
    double spec_upper = 0.0;  // M, largest preconditioner eigenvalue
    double spec_lower = 0.0;  // mu, smallest preconditioner eigenvalue
    double lr = 0.0;          // eta

    void validate() const {
        if (smoothness <= 0.0 || lr <= 0.0) {
            throw std::invalid_argument("DescentBoundParams: L and lr must be positive");
        }
        if (!(0.0 < spec_lower && spec_lower <= spec_upper)) {
            throw std::invalid_argument("DescentBoundParams: need 0 < mu <= M");
        }
    }
};

struct BoundCheck {
    double measured_drop = 0.0;
    double bound = 0.0;
    bool satisfied = false;
};

struct BoundReport {
    bool applicable = false;
    std::vector<BoundCheck> checks;

    bool all_satisfied() const {
        for (const auto& c : checks)
            if (!c.satisfied) return false;
        return true;
    }
};

/// Per-step guaranteed-descent check: the loss drop must be at least
/// C(eta) (||p_R||^2 + ||p_D||^2 + 2 ||p_R|| ||p_D|| S_intra) with
/// C(eta) = eta/M - L eta^2 / 2, valid for eta < 2/(L M). Norms are of
/// the preconditioned component updates without the learning rate.
inline BoundReport descent_bound_check(const std::vector<double>& losses,
                                       const std::vector<double>& p_r_norms,
                                       const std::vector<double>& p_d_norms,
                                       const std::vector<double>& intra_scores,
                                       const DescentBoundParams& params) {
    params.validate();
    const std::size_t steps = p_r_norms.size();
    if (losses.size() != steps + 1 || p_d_norms.size() != steps ||
        intra_scores.size() != steps) {
        throw std::invalid_argument("descent_bound_check: trajectory length mismatch");
    }
    BoundReport report;
    if (params.lr >= 2.0 / (params.smoothness * params.spec_upper)) {
        report.applicable = false;
        return report;
    }
    report.applicable = true;
    const double c =
        params.lr / params.spec_upper - params.smoothness * params.lr * params.lr / 2.0;
    for (std::size_t t = 0; t < steps; ++t) {
        BoundCheck chk;
        chk.measured_drop = losses[t] - losses[t + 1];
        const double pr = p_r_norms[t];
        const double pd = p_d_norms[t];
        chk.bound = c * (pr * pr + pd * pd + 2.0 * pr * pd * intra_scores[t]);
        const double slack = 1e-9 * std::max(1.0, std::abs(chk.bound));
        chk.satisfied = chk.measured_drop + slack >= chk.bound;
        report.checks.push_back(chk);
    }
    return report;
}

struct TwoStepBoundParams {
    double smoothness = 0.0;  // L
    double spec_upper = 0.0;  // M
    double sigma = 0.0;       // isotropic proxy: P^{-1} ~ (1/sigma) I
    double lr = 0.0;

    void validate() const {
        if (smoothness <= 0.0 || spec_upper <= 0.0 || sigma <= 0.0 || lr <= 0.0) {
            throw std::invalid_argument("TwoStepBoundParams: all parameters must be positive");
        }
    }
};

/// Two-step coherence check over consecutive update pairs:
///   L(theta_{t-1}) - L(theta_{t+1}) >=
///     (eta/M) ||p_{t-1}||^2 - (L eta^2/2)(||p_{t-1}||^2 + ||p_t||^2)
///     + C2(eta) ||p_{t-1}|| ||p_t|| S_inter,   C2(eta) = eta/sigma - L eta^2.
/// Valid for eta < 1/(L sigma). inter_scores[t] holds S(p_{t-1}, p_t);
/// entry 0 is ignored. A single-step trajectory yields an empty report.
inline BoundReport two_step_bound_check(const std::vector<double>& losses,
                                        const std::vector<double>& p_norms,
                                        const std::vector<double>& inter_scores,
                                        const TwoStepBoundParams& params) {
    params.validate();
    const std::size_t steps = p_norms.size();
    if (losses.size() != steps + 1 || inter_scores.size() != steps) {
        throw std::invalid_argument("two_step_bound_check: trajectory length mismatch");
    }
    BoundReport report;
    if (params.lr >= 1.0 / (params.smoothness * params.sigma)) {
        report.applicable = false;
        return report;
    }
    report.applicable = true;
    const double eta = params.lr;
    const double c2 = eta / params.sigma - params.smoothness * eta * eta;
    for (std::size_t t = 1; t < steps; ++t) {
        BoundCheck chk;
        chk.measured_drop = losses[t - 1] - losses[t + 1];
        const double pa = p_norms[t - 1];
        const double pb = p_norms[t];
        chk.bound = (eta / params.spec_upper) * pa * pa -
                    0.5 * params.smoothness * eta * eta * (pa * pa + pb * pb) +
                    c2 * pa * pb * inter_scores[t];
        const double slack = 1e-9 * std::max(1.0, std::abs(chk.bound));
        chk.satisfied = chk.measured_drop + slack >= chk.bound;
        report.checks.push_back(chk);
    }
    return report;
}

}  // namespace rdlab::diag

// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdlab/dense.hpp"

namespace rdlab {

/// Result of a symmetric eigendecomposition A = Q diag(values) Q^T.
/// Eigenvalues ascending, eigenvectors stored as the columns of Q.
struct SymEig {
    std::vector<double> eigenvalues;
    DenseMatrix eigenvectors;
};

namespace detail {

inline double offdiag_frobenius(const DenseMatrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

}  // namespace detail

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Sweeps run until the off-diagonal Frobenius mass drops below
/// tol * ||A||_F, capped at 100 sweeps.
inline SymEig sym_eig(const DenseMatrix& a, double tol = 1e-12) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("sym_eig: matrix must be square");
    }
    if (!a.all_finite()) {
        throw std::invalid_argument("sym_eig: matrix has non-finite entries");
    }
    const std::size_t n = a.rows();
    const double norm_a = a.frobenius_norm();

    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = a(i, j) - a(j, i);
            asym += 2.0 * d * d;
        }
    if (std::sqrt(asym) > tol * norm_a) {
        throw std::invalid_argument("sym_eig: matrix asymmetry exceeds tolerance");
    }

    DenseMatrix w(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            w(i, j) = 0.5 * (a(i, j) + a(j, i));
    DenseMatrix q = DenseMatrix::identity(n);

    const double target = std::max(tol * norm_a, 1e-300);
    constexpr int kMaxSweeps = 100;
    bool converged = detail::offdiag_frobenius(w) <= target;

    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t qi = p + 1; qi < n; ++qi) {
                const double apq = w(p, qi);
                if (apq == 0.0) continue;
                const double app = w(p, p);
                const double aqq = w(qi, qi);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0)
                                     ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                     : -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double wkp = w(k, p);
                    const double wkq = w(k, qi);
                    w(k, p) = c * wkp - s * wkq;
                    w(k, qi) = s * wkp + c * wkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double wpk = w(p, k);
                    const double wqk = w(qi, k);
                    w(p, k) = c * wpk - s * wqk;
                    w(qi, k) = s * wpk + c * wqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double qkp = q(k, p);
                    const double qkq = q(k, qi);
                    q(k, p) = c * qkp - s * qkq;
                    q(k, qi) = s * qkp + c * qkq;
                }
            }
        }
        converged = detail::offdiag_frobenius(w) <= target;
    }
    if (!converged) {
        throw std::runtime_error("sym_eig: no convergence within 100 Jacobi sweeps");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return w(i, i) < w(j, j); });

    SymEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.eigenvalues[j] = w(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) {
            out.eigenvectors(i, j) = q(i, order[j]);
        }
    }
    return out;
}

/// Q (Lambda + damping I)^(-p) Q^T for symmetric a. p = 1 is the inverse,
/// p = 1/2 the whitening transform, p = 1/4 the Shampoo root; negative p
/// yields positive powers (p = -1/2 gives the SPD square root).
inline DenseMatrix spd_inv_power(const DenseMatrix& a, double p, double damping,
                                 double eig_tol = 1e-12) {
    if (damping < 0.0) {
        throw std::invalid_argument("spd_inv_power: damping must be nonnegative");
    }
    const SymEig eig = sym_eig(a, eig_tol);
    const std::size_t n = a.rows();
    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lam = eig.eigenvalues[i] + damping;
        if (lam <= 0.0) {
            throw std::invalid_argument("spd_inv_power: damped eigenvalue " +
                                        std::to_string(lam) + " is not positive");
        }
        scaled[i] = std::pow(lam, -p);
    }
    const DenseMatrix& q = eig.eigenvectors;
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += q(i, k) * scaled[k] * q(j, k);
            out(i, j) = s;
        }
    return out;
}

/// Kronecker product, block (i,j) of the result is a(i,j) * b.
inline DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double aij = a(i, j);
            if (aij == 0.0) continue;
            for (std::size_t k = 0; k < b.rows(); ++k)
                for (std::size_t l = 0; l < b.cols(); ++l)
                    out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
        }
    return out;
}

}  // namespace rdlab

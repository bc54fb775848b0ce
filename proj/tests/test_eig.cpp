// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "rdlab/dense.hpp"
#include "rdlab/eig.hpp"
#include "test_support.hpp"

using rdlab::DenseMatrix;
using rdlab::sym_eig;
using testsupport::rel_err;

namespace {

DenseMatrix reconstruct(const rdlab::SymEig& eig) {
    const std::size_t n = eig.eigenvalues.size();
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += eig.eigenvectors(i, k) * eig.eigenvalues[k] * eig.eigenvectors(j, k);
            out(i, j) = s;
        }
    return out;
}

double orthogonality_residual(const DenseMatrix& q) {
    const DenseMatrix qtq = rdlab::matmul(q.transpose(), q);
    return (qtq - DenseMatrix::identity(q.rows())).frobenius_norm();
}

}  // namespace

TEST_CASE("sym_eig of the identity") {
    const auto eig = sym_eig(DenseMatrix::identity(4));
    for (double v : eig.eigenvalues) CHECK(v == 1.0);
    CHECK(orthogonality_residual(eig.eigenvectors) <= 1e-12);
}

TEST_CASE("sym_eig of a diagonal matrix sorts ascending with axis vectors") {
    const auto eig = sym_eig(DenseMatrix::diagonal({10.0, 1.0}));
    CHECK(eig.eigenvalues[0] == 1.0);
    CHECK(eig.eigenvalues[1] == 10.0);
    CHECK(std::abs(eig.eigenvectors(1, 0)) == 1.0);
    CHECK(std::abs(eig.eigenvectors(0, 1)) == 1.0);
}

TEST_CASE("sym_eig reconstruction residual on random symmetric matrices") {
    rdlab::CounterRng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseMatrix a = testsupport::random_symmetric(rng, 6);
        const auto eig = sym_eig(a, 1e-12);
        CHECK(rel_err(reconstruct(eig), a) <= 1e-10);
        CHECK(orthogonality_residual(eig.eigenvectors) <= 1e-12);
    }
}

TEST_CASE("sym_eig rejects non-square and asymmetric inputs") {
    CHECK_THROWS_AS(sym_eig(DenseMatrix(2, 3)), std::invalid_argument);
    DenseMatrix a(2, 2, {1.0, 2.0, 0.0, 1.0});
    CHECK_THROWS_AS(sym_eig(a, 1e-12), std::invalid_argument);
}

TEST_CASE("eigenvalue sum matches the trace") {
    rdlab::CounterRng rng(11);
    for (std::size_t n : {3u, 8u, 16u}) {
        const DenseMatrix a = testsupport::random_symmetric(rng, n);
        const auto eig = sym_eig(a);
        double sum = 0.0;
        for (double v : eig.eigenvalues) sum += v;
        CHECK(std::abs(sum - a.trace()) <= 1e-10 * a.frobenius_norm());
    }
}

TEST_CASE("eigenvalue product matches hand determinants") {
    const auto e2 = sym_eig(DenseMatrix(2, 2, {3.0, 1.0, 1.0, 2.0}));
    CHECK(std::abs(e2.eigenvalues[0] * e2.eigenvalues[1] - 5.0) <= 1e-12);

    // det = 2(2*2-1) - 1(1*2-0) + 0 = 4
    const auto e3 = sym_eig(DenseMatrix(3, 3, {2, 1, 0, 1, 2, 1, 0, 1, 2}));
    CHECK(std::abs(e3.eigenvalues[0] * e3.eigenvalues[1] * e3.eigenvalues[2] - 4.0) <= 1e-12);
}

TEST_CASE("spd_inv_power identity and scalar cases") {
    CHECK(rel_err(rdlab::spd_inv_power(DenseMatrix::identity(3), 0.25, 0.0),
                  DenseMatrix::identity(3)) <= 1e-14);
    const DenseMatrix s = rdlab::spd_inv_power(DenseMatrix::diagonal({16.0}), 0.25, 0.0);
    CHECK(std::abs(s(0, 0) - 0.5) <= 1e-14);
}

TEST_CASE("spd_inv_power whitening reconstructs the identity") {
    rdlab::CounterRng rng(12);
    for (int trial = 0; trial < 8; ++trial) {
        const DenseMatrix a = testsupport::random_spd(rng, 6, 0.3, 5.0);
        const DenseMatrix w = rdlab::spd_inv_power(a, 0.5, 0.0);
        const DenseMatrix should_be_identity = rdlab::matmul(w, rdlab::matmul(a, w));
        CHECK(rel_err(should_be_identity, DenseMatrix::identity(6)) <= 1e-8);
    }
}

TEST_CASE("spd_inv_power full inverse up to 32 dims") {
    rdlab::CounterRng rng(13);
    for (std::size_t n : {4u, 16u, 32u}) {
        const DenseMatrix a = testsupport::random_spd(rng, n, 0.2, 6.0);
        const DenseMatrix inv = rdlab::spd_inv_power(a, 1.0, 0.0);
        CHECK(rel_err(rdlab::matmul(inv, a), DenseMatrix::identity(n)) <= 1e-8);
    }
}

TEST_CASE("spd_inv_power damping shifts eigenvalues before the power") {
    const DenseMatrix a = DenseMatrix::diagonal({3.0});
    const DenseMatrix r = rdlab::spd_inv_power(a, 1.0, 1.0);
    CHECK(std::abs(r(0, 0) - 0.25) <= 1e-15);
}

TEST_CASE("spd_inv_power rejects nonpositive damped spectra") {
    const DenseMatrix a = DenseMatrix::diagonal({1.0, -2.0});
    CHECK_THROWS_AS(rdlab::spd_inv_power(a, 0.5, 0.0), std::invalid_argument);
    CHECK_NOTHROW(rdlab::spd_inv_power(a, 0.5, 3.0));
}

TEST_CASE("negative exponent gives the SPD square root") {
    rdlab::CounterRng rng(14);
    const DenseMatrix a = testsupport::random_spd(rng, 5, 0.4, 3.0);
    const DenseMatrix root = rdlab::spd_inv_power(a, -0.5, 0.0);
    CHECK(rel_err(rdlab::matmul(root, root), a) <= 1e-10);
}

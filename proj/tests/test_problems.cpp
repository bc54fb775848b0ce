// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "rdlab/eig.hpp"
#include "rdlab/problems.hpp"
#include "test_support.hpp"

using namespace rdlab;
using problems::BiQuadraticRD;
using problems::LinearAERD;
using problems::QuadraticObjective;
using problems::TwoLayerNetRD;
using testsupport::fd_grad;
using testsupport::fd_grad_matrix;
using testsupport::fd_hessian;
using testsupport::rel_err;

namespace {

QuadraticObjective make_quadratic(CounterRng& rng, std::size_t n) {
    return {testsupport::random_spd(rng, n), random_gaussian(rng, n, 1)};
}

BiQuadraticRD make_biquadratic(CounterRng& rng, std::size_t n, double lambda = 0.7) {
    BiQuadraticRD obj;
    obj.hessian_r = testsupport::random_spd(rng, n);
    obj.hessian_d = testsupport::random_spd(rng, n);
    obj.anchor_r = random_gaussian(rng, n, 1);
    obj.anchor_d = random_gaussian(rng, n, 1);
    obj.lambda = lambda;
    return obj;
}

TwoLayerNetRD make_net(CounterRng& rng, std::size_t m, std::size_t d, double lambda = 0.3) {
    TwoLayerNetRD net;
    net.enc = random_gaussian(rng, m, d, 0.4);
    net.dec = random_gaussian(rng, d, m, 0.4);
    net.input_cov = testsupport::random_spd(rng, d, 0.5, 2.0);
    net.lambda = lambda;
    return net;
}

}  // namespace

TEST_CASE("quadratic loss vanishes at the anchor and grows elsewhere") {
    CounterRng rng(21);
    const auto obj = make_quadratic(rng, 5);
    CHECK(obj.loss(obj.anchor).total == 0.0);
    const DenseMatrix theta = obj.anchor + random_gaussian(rng, 5, 1);
    CHECK(obj.loss(theta).total > 0.0);
    CHECK(obj.loss(theta).dist == 0.0);
}

TEST_CASE("biquadratic gradient components vanish at a shared anchor") {
    CounterRng rng(22);
    auto obj = make_biquadratic(rng, 4);
    obj.anchor_d = obj.anchor_r;
    const auto [gr, gd] = obj.grad_components(obj.anchor_r);
    CHECK(gr.frobenius_norm() == 0.0);
    CHECK(gd.frobenius_norm() == 0.0);
}

TEST_CASE("gradients match central finite differences across objectives") {
    CounterRng rng(23);

    for (int trial = 0; trial < 25; ++trial) {
        const auto quad = make_quadratic(rng, 4);
        const DenseMatrix theta = random_gaussian(rng, 4, 1);
        const auto fd = fd_grad([&](const DenseMatrix& t) { return quad.loss(t).total; }, theta);
        CHECK(rel_err(quad.grad(theta), fd) <= 1e-5);
    }

    for (int trial = 0; trial < 25; ++trial) {
        const auto obj = make_biquadratic(rng, 4);
        const DenseMatrix theta = random_gaussian(rng, 4, 1);
        const auto fd = fd_grad([&](const DenseMatrix& t) { return obj.loss(t).total; }, theta);
        CHECK(rel_err(obj.grad(theta), fd) <= 1e-5);
    }

    for (int trial = 0; trial < 25; ++trial) {
        const auto ae = LinearAERD::random_init(6, 0.5, 0.8, 100 + trial);
        const auto g = ae.grad_total(ae.w_e, ae.w_d);
        const auto fd_e = fd_grad(
            [&](const DenseMatrix& we) { return ae.loss(we, ae.w_d).total; }, ae.w_e);
        const auto fd_d = fd_grad(
            [&](const DenseMatrix& wd) { return ae.loss(ae.w_e, wd).total; }, ae.w_d);
        CHECK(rel_err(g.e, fd_e) <= 1e-5);
        CHECK(rel_err(g.d, fd_d) <= 1e-5);
    }

    for (int trial = 0; trial < 25; ++trial) {
        CounterRng trial_rng(300 + trial);
        const auto net = make_net(trial_rng, 3, 4);
        const DenseMatrix batch = net.sample_batch(12, 400 + trial);
        const auto g = net.grad_total(net.enc, net.dec, batch);
        const auto fd_enc = fd_grad_matrix(
            [&](const DenseMatrix& w) { return net.loss(w, net.dec, batch).total; }, net.enc);
        const auto fd_dec = fd_grad_matrix(
            [&](const DenseMatrix& w) { return net.loss(net.enc, w, batch).total; }, net.dec);
        CHECK(rel_err(g.enc, fd_enc) <= 1e-5);
        CHECK(rel_err(g.dec, fd_dec) <= 1e-5);
    }
}

TEST_CASE("linear AE formula anchors") {
    auto ae = LinearAERD::random_init(8, 0.1, 0.5, 7);
    const double c = LinearAERD::kInputSecondMoment;

    SECTION("zero encoder gives total = C and the stated component gradients") {
        const DenseMatrix zero(8, 1);
        CHECK(ae.loss(zero, ae.w_d).total == c);
        const auto gd = ae.grad_dist(zero, ae.w_d);
        CHECK(rel_err(gd.e, -2.0 * c * ae.w_d) <= 1e-15);
        CHECK(gd.d.frobenius_norm() == 0.0);
        const auto gr = ae.grad_rate(zero, ae.w_d);
        CHECK(gr.e.frobenius_norm() == 0.0);
        CHECK(gr.d.frobenius_norm() == 0.0);
    }

    SECTION("rate gradient never touches the decoder") {
        const auto gr = ae.grad_rate(ae.w_e, ae.w_d);
        CHECK(rel_err(gr.e, 2.0 * c * ae.w_e) <= 1e-15);
        CHECK(gr.d.frobenius_norm() == 0.0);
    }
}

TEST_CASE("linear AE small-init distortion gradient converges cubically to its leading term") {
    // Fixed unit-scale draws, swept by epsilon.
    CounterRng rng(31);
    const DenseMatrix we_bar = random_gaussian(rng, 64, 1);
    const DenseMatrix wd_bar = random_gaussian(rng, 64, 1);
    const double c = LinearAERD::kInputSecondMoment;

    std::vector<double> errs;
    const std::vector<double> eps_grid{1e-1, 1e-2, 1e-3};
    for (const double eps : eps_grid) {
        LinearAERD ae;
        ae.latent_dim = 64;
        ae.init_scale = eps;
        ae.lambda = 0.0;
        ae.w_e = we_bar * eps;
        ae.w_d = wd_bar * eps;
        const auto gd = ae.grad_dist(ae.w_e, ae.w_d);
        const DenseMatrix leading = (-2.0 * c * eps) * wd_bar;
        errs.push_back((gd.e - leading).frobenius_norm());
    }
    // err(eps) = K eps^3: each decade of eps drops the error by ~1e3.
    CHECK(errs[0] / errs[1] > 500.0);
    CHECK(errs[0] / errs[1] < 2000.0);
    CHECK(errs[1] / errs[2] > 500.0);
    CHECK(errs[1] / errs[2] < 2000.0);
}

TEST_CASE("exact Hessians agree with second differences") {
    CounterRng rng(24);
    const auto quad = make_quadratic(rng, 3);
    const DenseMatrix theta = random_gaussian(rng, 3, 1);
    const auto fd_q =
        fd_hessian([&](const DenseMatrix& t) { return quad.loss(t).total; }, theta);
    CHECK(rel_err(quad.exact_hessian(), fd_q) <= 1e-5);

    auto bi = make_biquadratic(rng, 3, 0.0);
    CHECK(rel_err(bi.exact_hessian(), bi.hessian_r) == 0.0);
    bi.lambda = 1.3;
    const auto fd_b = fd_hessian([&](const DenseMatrix& t) { return bi.loss(t).total; }, theta);
    CHECK(rel_err(bi.exact_hessian(), fd_b) <= 1e-5);
}

TEST_CASE("perfect reconstruction kills the distortion term") {
    CounterRng rng(25);
    TwoLayerNetRD net;
    net.enc = random_gaussian(rng, 4, 3, 0.6);
    // Build dec with dec*enc = I through the normal equations.
    const DenseMatrix gram = matmul(net.enc.transpose(), net.enc);
    const DenseMatrix inv = spd_inv_power(gram, 1.0, 0.0);
    net.dec = matmul(inv, net.enc.transpose());
    CHECK(rel_err(matmul(net.dec, net.enc), DenseMatrix::identity(3)) <= 1e-10);
    net.input_cov = DenseMatrix::identity(3);
    net.lambda = 0.0;
    const DenseMatrix batch = net.sample_batch(20, 5);
    CHECK(net.loss(batch).total <= 1e-20);
}

TEST_CASE("sample_batch moments, shape, and determinism") {
    TwoLayerNetRD net;
    net.enc = DenseMatrix::identity(8);
    net.dec = DenseMatrix::identity(8);
    net.input_cov = DenseMatrix::identity(8);

    SECTION("identity covariance sample moments") {
        const DenseMatrix batch = net.sample_batch(10000, 99);
        DenseMatrix cov = matmul(batch.transpose(), batch);
        cov *= 1.0 / 10000.0;
        CHECK((cov - DenseMatrix::identity(8)).max_abs() < 0.1);
    }

    SECTION("single sample keeps the row-per-sample convention") {
        const DenseMatrix one = net.sample_batch(1, 7);
        CHECK(one.rows() == 1);
        CHECK(one.cols() == 8);
    }

    SECTION("same seed is bit-identical, different seed is not") {
        const DenseMatrix a = net.sample_batch(16, 123);
        const DenseMatrix b = net.sample_batch(16, 123);
        const DenseMatrix c = net.sample_batch(16, 124);
        CHECK(a == b);
        CHECK(!(a == c));
    }

    SECTION("nonidentity covariance is reproduced") {
        CounterRng rng(26);
        net.input_cov = testsupport::random_spd(rng, 8, 0.5, 3.0);
        const DenseMatrix batch = net.sample_batch(40000, 17);
        DenseMatrix cov = matmul(batch.transpose(), batch);
        cov *= 1.0 / 40000.0;
        CHECK((cov - net.input_cov).max_abs() < 0.15);
    }
}

TEST_CASE("kron factor capture") {
    SECTION("single sample makes rank-one factors") {
        CounterRng rng(27);
        const auto net = make_net(rng, 3, 4);
        const DenseMatrix batch = net.sample_batch(1, 3);
        const auto factors = problems::capture_kron_factors(net, batch);
        // rank <= 1: all 2x2 minors vanish
        const auto& r = factors.encoder.r;
        for (std::size_t i = 0; i + 1 < r.rows(); ++i)
            for (std::size_t j = 0; j + 1 < r.cols(); ++j)
                CHECK(std::abs(r(i, j) * r(i + 1, j + 1) - r(i, j + 1) * r(i + 1, j)) <= 1e-12);
    }

    SECTION("whitened inputs give an identity encoder r factor") {
        CounterRng rng(28);
        auto net = make_net(rng, 3, 5);
        net.input_cov = DenseMatrix::identity(5);
        const DenseMatrix batch = net.sample_batch(20000, 11);
        const auto factors = problems::capture_kron_factors(net, batch);
        CHECK((factors.encoder.r - DenseMatrix::identity(5)).max_abs() < 0.1);
    }

    SECTION("decoder factor product matches the exact Gauss-Newton block") {
        // Constructed so the residual second moment is isotropic: batch
        // rows are +-axis vectors, enc = 2I, dec = I, hence resid = x.
        TwoLayerNetRD net;
        net.enc = DenseMatrix::identity(2) * 2.0;
        net.dec = DenseMatrix::identity(2);
        net.input_cov = DenseMatrix::identity(2);
        net.lambda = 0.0;
        DenseMatrix batch(4, 2);
        batch(0, 0) = 1.0;
        batch(1, 0) = -1.0;
        batch(2, 1) = 1.0;
        batch(3, 1) = -1.0;

        const auto factors = problems::capture_kron_factors(net, batch);
        const DenseMatrix gn_from_factors = kron(factors.decoder.r, factors.decoder.l);

        // Brute-force Hessian of the decoder block under column-major
        // flattening; the loss is quadratic in dec, so this is the exact
        // Gauss-Newton block.
        const std::size_t d = 2, m = 2;
        DenseMatrix gn_fd(d * m, d * m);
        const auto loss_of = [&](const DenseMatrix& w) {
            return net.loss(net.enc, w, batch).total;
        };
        const double h = 1e-4;
        auto idx = [&](std::size_t k) {
            return std::pair<std::size_t, std::size_t>{k % d, k / d};
        };
        for (std::size_t a = 0; a < d * m; ++a) {
            for (std::size_t b = 0; b < d * m; ++b) {
                DenseMatrix pp = net.dec, pm = net.dec, mp = net.dec, mm = net.dec;
                const auto [ia, ja] = idx(a);
                const auto [ib, jb] = idx(b);
                pp(ia, ja) += h;
                pp(ib, jb) += h;
                pm(ia, ja) += h;
                pm(ib, jb) -= h;
                mp(ia, ja) -= h;
                mp(ib, jb) += h;
                mm(ia, ja) -= h;
                mm(ib, jb) -= h;
                gn_fd(a, b) =
                    (loss_of(pp) - loss_of(pm) - loss_of(mp) + loss_of(mm)) / (4.0 * h * h);
            }
        }
        CHECK(rel_err(gn_from_factors, gn_fd) <= 1e-3);
    }
}

TEST_CASE("random_spd_with_condition hits the requested condition number") {
    const DenseMatrix cov = problems::random_spd_with_condition(8, 100.0, 5);
    const auto eig = sym_eig(cov);
    CHECK(std::abs(eig.eigenvalues.back() / eig.eigenvalues.front() - 100.0) <= 1e-6);
}

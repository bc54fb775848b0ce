// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "rdlab/oracle_suites.hpp"
#include "test_support.hpp"

using namespace rdlab;
using namespace rdlab::oracles;

TEST_CASE("closed-form inter-step cosine") {
    SECTION("identity B gives exactly one for any step size below one") {
        CounterRng rng(70);
        const DenseMatrix u = testsupport::random_unit(rng, 4);
        // cancellation in 1 - 2 eta + eta^2 costs a couple of digits near eta = 1
        for (const double eta : {0.1, 0.5, 0.9}) {
            WhitenedQuadratic inst{DenseMatrix::identity(4), {1, 1, 1, 1}, eta};
            CHECK(std::abs(adam_inter_cosine_exact(inst, u).exact - 1.0) <= 1e-13);
        }
    }

    SECTION("eigenvector directions give exactly one") {
        WhitenedQuadratic inst{DenseMatrix::diagonal({0.5, 2.0, 5.0}), {1, 1, 1}, 0.2};
        const DenseMatrix e2 = DenseMatrix::column({0.0, 1.0, 0.0});
        CHECK(std::abs(adam_inter_cosine_exact(inst, e2).exact - 1.0) <= 1e-14);
    }

    SECTION("flip-flop instance lands exactly on minus one") {
        WhitenedQuadratic inst{DenseMatrix::diagonal({1.0, 10.0}), {1.0, 1.0}, 0.5};
        const DenseMatrix e2 = DenseMatrix::column({0.0, 1.0});
        CHECK(adam_inter_cosine_exact(inst, e2).exact == -1.0);
    }

    SECTION("non-unit directions and degenerate denominators are rejected") {
        WhitenedQuadratic inst{DenseMatrix::identity(2), {1.0, 1.0}, 1.0};
        CHECK_THROWS_AS(adam_inter_cosine_exact(inst, DenseMatrix::column({2.0, 0.0})),
                        std::invalid_argument);
        // eta exactly 1/mu1 with mu2 = mu1^2 makes the denominator vanish
        CHECK_THROWS_AS(adam_inter_cosine_exact(inst, DenseMatrix::column({1.0, 0.0})),
                        std::invalid_argument);
    }

    SECTION("matches the simulated one-step dynamics to 1e-12") {
        CHECK(check_adam_closed_form(100).pass);
    }

    SECTION("Taylor surrogate is third-order accurate") {
        CHECK(check_taylor_surrogate().pass);
    }
}

TEST_CASE("rho_adam intra-step limit") {
    SECTION("equal component Hessians align for any diagonal") {
        CounterRng rng(71);
        const DenseMatrix h = testsupport::random_spd(rng, 4, 0.5, 3.0);
        IntraLimitInstance inst;
        inst.h_r = h;
        inst.h_d = h;
        inst.d_diag = {0.5, 1.0, 2.0, 0.7};
        inst.direction = testsupport::random_unit(rng, 4);
        CHECK(rho_adam(inst) >= 1.0 - 1e-12);
    }

    SECTION("the rotated conflict instance is negative") {
        CHECK(check_rho_rotated_negative().pass);
        CHECK(rho_adam(rotated_conflict_instance()) < 0.0);
    }

    SECTION("jointly diagonal instances stay in the unit interval") {
        CHECK(check_rho_joint_diagonal(10000).pass);
    }

    SECTION("proportional pairs align") {
        CHECK(check_rho_proportional_one().pass);
    }
}

TEST_CASE("sign-cosine law of large numbers") {
    SECTION("a single latent coordinate always gives 1/sqrt(2)") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const MonteCarloCosine mc = slln_sign_cosine(1, 1, seed);
            CHECK(std::abs(std::abs(mc.per_seed[0]) - 1.0 / std::sqrt(2.0)) <= 1e-15);
        }
    }

    SECTION("wide latents are asymptotically orthogonal with the stated variance") {
        const MonteCarloCosine mc = slln_sign_cosine(4096, 200, 100);
        CHECK(std::abs(mc.mean) < 0.02);
        const double ref_var = 1.0 / (2.0 * 4096.0);
        const double sample_var = mc.sample_std * mc.sample_std;
        // variance matches 1/(2M) within three standard errors
        const double se = ref_var * std::sqrt(2.0 / 199.0);
        CHECK(std::abs(sample_var - ref_var) <= 3.0 * se);
    }

    SECTION("end-to-end sign-step measurement matches the formula per seed") {
        CHECK(check_slln_end_to_end(1024, 50).pass);
    }
}

TEST_CASE("scaled sign cosine") {
    SECTION("unit scalings reduce to the plain formula") {
        CHECK(check_scaled_ones_reduces().pass);
    }

    SECTION("log-normal scalings preserve asymptotic orthogonality") {
        CHECK(check_scaled_lognormal().pass);
    }

    SECTION("single-coordinate collapse to b/sqrt(b^2+c^2)") {
        CHECK(check_scaled_m1_collapse().pass);
    }

    SECTION("nonpositive scalings are rejected") {
        const ScalingLaw bad = [](CounterRng&) { return std::array<double, 3>{1.0, -1.0, 1.0}; };
        CHECK_THROWS_AS(scaled_sign_cosine(4, 1, bad), std::invalid_argument);
    }
}

TEST_CASE("newton inter-step scaling oracle") {
    SECTION("a pure quadratic keeps the direction fixed at every step size") {
        CHECK(check_newton_scaling_quadratic().pass);
    }

    SECTION("the quartic perturbation decays as the step shrinks") {
        const SuiteCheck chk = check_newton_scaling_quartic();
        CHECK(chk.pass);
        CHECK(chk.value >= 0.9);  // log-log slope
    }

    SECTION("bad grids are rejected") {
        CounterRng rng(72);
        QuarticObjective obj{testsupport::random_spd(rng, 4, 0.5, 2.0), 0.01};
        const DenseMatrix theta0 = testsupport::random_unit(rng, 4);
        CHECK_THROWS_AS(newton_interstep_scaling(obj, theta0, {-0.1}, 0.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(newton_interstep_scaling(obj, theta0, {}, 0.0),
                        std::invalid_argument);
    }
}

TEST_CASE("kurtosis growth comparison") {
    SECTION("correlated inputs grow less under soap") {
        CHECK(check_kurt_correlated().pass);
    }

    SECTION("isotropic one-step difference is statistical noise") {
        CHECK(check_kurt_isotropic_null().pass);
    }

    SECTION("zero learning rate freezes both") {
        CHECK(check_kurt_zero_lr().pass);
    }
}

TEST_CASE("the full oracle suite passes and serializes") {
    const auto checks = run_suite("");
    CHECK(checks.size() >= 14);
    for (const auto& c : checks) {
        INFO(c.suite << "/" << c.name << ": " << c.detail);
        CHECK(c.pass);
    }
    const std::string csv = suite_csv(checks);
    CHECK(csv.rfind("suite,check,pass,value,seconds,detail\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(checks.size()) + 1);
}

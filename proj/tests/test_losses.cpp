#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rplcil/losses.hpp"
#include "rplcil/rng.hpp"

using namespace rplcil;

TEST_CASE("kd_loss is zero when teacher equals student") {
    const LogitPair z{0.7, -1.3};
    CHECK(kd_loss(z, z, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(kd_loss(z, z, 2.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kd_loss hand-derived case (2,0) vs (0,2) at T=1") {
    // softmax(2,0) = (e^2, 1)/(e^2+1); KL collapses to 2*(p - (1-p)).
    const double p = std::exp(2.0) / (std::exp(2.0) + 1.0);
    const double expected = 2.0 * (p - (1.0 - p));
    const double got = kd_loss(LogitPair{2.0, 0.0}, LogitPair{0.0, 2.0}, 1.0);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    CHECK(got == doctest::Approx(1.5232).epsilon(1e-3));
}

TEST_CASE("kd_loss nonnegative on random finite pairs") {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        const LogitPair t{rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)};
        const LogitPair s{rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)};
        const double T = rng.uniform(0.25, 5.0);
        CHECK(kd_loss(t, s, T) >= -1e-12);
    }
}

TEST_CASE("combined_loss reduces to ce at lambda = gamma = 0") {
    UpdatePlan plan;
    plan.lambda_kd = 0.0;
    plan.gamma_reg = 0.0;
    CHECK(combined_loss(0.42, 9.0, 7.0, plan) == doctest::Approx(0.42));
}

TEST_CASE("combined_loss arithmetic") {
    UpdatePlan plan; // lambda 1.0, gamma 0.1
    CHECK(combined_loss(1.0, 2.0, 3.0, plan) == doctest::Approx(3.3));
}

TEST_CASE("combined_loss monotone in each component") {
    UpdatePlan plan;
    const double base = combined_loss(1.0, 1.0, 1.0, plan);
    CHECK(combined_loss(1.5, 1.0, 1.0, plan) >= base);
    CHECK(combined_loss(1.0, 1.5, 1.0, plan) >= base);
    CHECK(combined_loss(1.0, 1.0, 1.5, plan) >= base);
}

TEST_CASE("l2sp penalty") {
    CHECK(l2sp_penalty({1.0, -2.0, 3.5}, {1.0, -2.0, 3.5}) == doctest::Approx(0.0));
    CHECK(l2sp_penalty({3.0}, {1.0}) == doctest::Approx(2.0));
    // doubling deviations quadruples the penalty
    const double p1 = l2sp_penalty({2.0, -1.0}, {1.0, 1.0});
    const double p2 = l2sp_penalty({3.0, -3.0}, {1.0, 1.0});
    CHECK(p2 == doctest::Approx(4.0 * p1));
    CHECK_THROWS_AS(l2sp_penalty({1.0}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("ewc penalty") {
    CHECK(ewc_penalty({5.0, -9.0}, {0.0, 0.0}, {0.0, 0.0}) == doctest::Approx(0.0));
    // unit Fisher reduces to l2sp
    const std::vector<double> params{2.0, -1.0, 0.5};
    const std::vector<double> anchor{1.0, 1.0, 0.0};
    CHECK(ewc_penalty(params, anchor, {1.0, 1.0, 1.0}) ==
          doctest::Approx(l2sp_penalty(params, anchor)));
    // mixed toy case: 1/2 * (0.5*1 + 2*4) = 4.25
    CHECK(ewc_penalty({2.0, 3.0}, {1.0, 1.0}, {0.5, 2.0}) == doctest::Approx(4.25));
    CHECK_THROWS_AS(ewc_penalty({1.0}, {1.0}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("softmax2 normalizes within 1e-9") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const auto p = softmax2(LogitPair{rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0)});
        CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(p[0] >= 0.0);
        CHECK(p[1] >= 0.0);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "safectl/core.hpp"
#include "safectl/dynamics.hpp"

#include <cmath>
#include <random>

using namespace safectl;

namespace {

StateVec scalar(double v) {
    StateVec x(1);
    x << v;
    return x;
}

BarrierFunction quadratic_1d() {
    BarrierFunction b;
    b.dim = 1;
    b.value = [](const StateVec& x) { return 1.0 - 25.0 * x(0) * x(0); };
    b.gradient = [](const StateVec& x) { return scalar(-50.0 * x(0)); };
    return b;
}

}  // namespace

TEST_CASE("phi_eval on the scalar benchmark barrier") {
    const auto b = quadratic_1d();
    CHECK(phi_eval(b, scalar(0.2)) == doctest::Approx(0.0));   // boundary of [-0.2, 0.2]
    CHECK(phi_eval(b, scalar(0.0)) == doctest::Approx(1.0));
    CHECK(phi_eval(b, scalar(0.25)) == doctest::Approx(-0.5625));
}

TEST_CASE("phi_eval rejects dimension mismatches") {
    const auto b = quadratic_1d();
    StateVec wrong(2);
    wrong << 0.1, 0.2;
    CHECK_THROWS_AS(phi_eval(b, wrong), ConfigError);
}

TEST_CASE("grad_check accepts smooth barriers and flags a kink") {
    const auto b = quadratic_1d();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        CHECK(grad_check(b, scalar(unif(rng)), 1e-6) < 1e-5);
    }

    const auto vehicle = vehicle4d();
    std::uniform_real_distribution<double> wide(-5.0, 5.0);
    for (int i = 0; i < 100; ++i) {
        StateVec x(4);
        x << wide(rng), 40.0 * wide(rng), wide(rng), wide(rng);
        CHECK(grad_check(vehicle.barrier, x, 1e-6) < 1e-5);
    }

    BarrierFunction abs_x;
    abs_x.dim = 1;
    abs_x.value = [](const StateVec& x) { return std::abs(x(0)); };
    abs_x.gradient = [](const StateVec& x) { return scalar(x(0) >= 0.0 ? 1.0 : -1.0); };
    CHECK(grad_check(abs_x, scalar(0.0), 1e-6) >= 0.5);
}

TEST_CASE("finite-difference fallback gradient") {
    auto b = with_fd_gradient(1, [](const StateVec& x) { return 1.0 - 25.0 * x(0) * x(0); });
    const StateVec x = scalar(0.13);
    CHECK(b.gradient(x)(0) == doctest::Approx(-50.0 * 0.13).epsilon(1e-6));
    CHECK(grad_check(b, x, 1e-5) < 1e-4);  // fd vs fd at different steps
}

TEST_CASE("safe subset membership is exactly phi >= theta") {
    const SafeSubset s(quadratic_1d(), 0.001);
    // phi(0.19989...) straddles theta; membership must follow the comparison
    // exactly, no epsilon.
    const StateVec on_boundary = scalar(std::sqrt((1.0 - 0.001) / 25.0));
    CHECK(s.contains(scalar(0.0)));
    CHECK(s.contains(on_boundary) == (s.barrier.value(on_boundary) >= 0.001));
    CHECK_FALSE(s.contains(scalar(0.25)));
    CHECK_THROWS_AS(SafeSubset(quadratic_1d(), -0.1), ConfigError);
}

TEST_CASE("distance_to_subset examples and clamping") {
    const SafeSubset tight(quadratic_1d(), 0.001);
    CHECK(distance_to_subset(tight, scalar(0.25)) == doctest::Approx(0.5635));
    const StateVec boundary = scalar(std::sqrt((1.0 - 0.001) / 25.0));
    CHECK(distance_to_subset(tight, boundary) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(distance_to_subset(tight, scalar(0.0)) == 0.0);  // clamped inside

    const auto vehicle = vehicle4d();
    const SafeSubset wide(vehicle.barrier, 500.0);
    // A state with phi = 200 sits 300 below the threshold.
    StateVec x(4);
    x << 2.5, 50.0 * M_PI, 0.0, 0.0;
    CHECK(phi_eval(vehicle.barrier, x) == doctest::Approx(200.0));
    CHECK(distance_to_subset(wide, x) == doctest::Approx(300.0));
}

TEST_CASE("distance is non-negative and zero exactly on or inside the subset") {
    const SafeSubset s(quadratic_1d(), 0.01);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    for (int i = 0; i < 500; ++i) {
        const StateVec x = scalar(unif(rng));
        const double d = distance_to_subset(s, x);
        CHECK(d >= 0.0);
        CHECK((d == 0.0) == s.contains(x));
    }
}

TEST_CASE("information window validates its lookback") {
    CHECK_THROWS_AS(InformationWindow(scalar(1), scalar(0), scalar(0), 0.0), ConfigError);
    CHECK_THROWS_AS(InformationWindow(scalar(1), scalar(0), scalar(0), -0.1), ConfigError);
    const InformationWindow w(scalar(0.2), scalar(0.1), scalar(0.0), 0.5);
    CHECK(w.xdot_minus()(0) == doctest::Approx(0.2));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

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

SvdUncertaintyModel scalar_model() {
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    Eigen::VectorXd lam = Eigen::VectorXd::Ones(1);
    Eigen::VectorXd lo(1), hi(1);
    lo << 0.5;
    hi << 2.0;
    return SvdUncertaintyModel::make(one, one, lam, lo, hi);
}

}  // namespace

TEST_CASE("single Euler step by hand") {
    const auto bench = linear1d();
    const IntegratorConfig cfg{0.01, IntegrationMethod::euler, 0.01};
    // x + dt (1.5 x + u) = 0.1 + 0.01 (0.15 - 0.1)
    CHECK(step(bench.sys, cfg, scalar(0.1), scalar(-0.1))(0) == doctest::Approx(0.1005));

    // Exact drift cancellation freezes the state under Euler.
    CHECK(step(bench.sys, cfg, scalar(0.1), scalar(-0.15))(0) == doctest::Approx(0.1));
}

TEST_CASE("integrators against the closed-form exponential") {
    const double expected = 0.1 * std::exp(0.125);

    // The autonomous closed-loop field 0.5x, integrated directly.
    AffineSystem closed;
    closed.dim_state = 1;
    closed.dim_action = 1;
    closed.drift = [](const StateVec& x) { return StateVec(0.5 * x); };
    closed.actuation = [](const StateVec&) { return Eigen::MatrixXd::Zero(1, 1); };
    const auto zero_ctrl = state_feedback([](const StateVec&) { return scalar(0.0); });
    const auto bench = linear1d();

    const IntegratorConfig rk{2.5e-4, IntegrationMethod::rk4, 0.25};
    const auto rk_traj = simulate(closed, rk, bench.barrier, zero_ctrl, scalar(0.1));
    CHECK(std::abs(rk_traj.samples.back().x(0) - expected) < 1e-6);

    // Euler under the sampled feedback loop stays within the coarse bound.
    const IntegratorConfig eu{2.5e-4, IntegrationMethod::euler, 0.25};
    const auto eu_traj = simulate(bench.sys, eu, bench.barrier,
                                  state_feedback(bench.nominal), scalar(0.1));
    CHECK(std::abs(eu_traj.samples.back().x(0) - expected) < 1e-3);
}

TEST_CASE("trajectory bookkeeping: spacing, sample count, activation column") {
    const auto bench = linear1d();
    const IntegratorConfig cfg{0.01, IntegrationMethod::rk4, 0.1};
    const auto traj =
        simulate(bench.sys, cfg, bench.barrier, state_feedback(bench.nominal), scalar(0.05));
    REQUIRE(traj.samples.size() == 11);
    for (std::size_t i = 0; i + 1 < traj.samples.size(); ++i) {
        CHECK(traj.samples[i + 1].t - traj.samples[i].t == doctest::Approx(0.01));
        CHECK_FALSE(traj.samples[i].activated);
    }
}

TEST_CASE("nominal-only closed loop exits the safe set in the expected time") {
    const auto bench = linear1d();
    const IntegratorConfig cfg{2.5e-4, IntegrationMethod::rk4, 0.25};
    const auto traj = simulate(bench.sys, cfg, bench.barrier,
                               state_feedback(bench.nominal), scalar(0.1999));
    CHECK(traj.min_phi() < 0.0);
    // First unsafe sample near t = 2 ln(0.2/0.1999).
    double first_exit = -1.0;
    for (const auto& s : traj.samples) {
        if (s.phi < 0.0) {
            first_exit = s.t;
            break;
        }
    }
    const double predicted = 2.0 * std::log(0.2 / 0.1999);
    CHECK(first_exit == doctest::Approx(predicted).epsilon(0.5));
}

TEST_CASE("filtered closed loop is forward invariant from inside") {
    const auto bench = linear1d();
    FilterConfig fc;
    fc.theta = 0.001;
    fc.eta = 1.0;
    const IntegratorConfig cfg{2.5e-4, IntegrationMethod::rk4, 0.25};
    auto ctrl = filtered_controller(fc, scalar_model(), bench.barrier, bench.nominal);
    const auto traj = simulate(bench.sys, cfg, bench.barrier, ctrl, scalar(0.1999),
                               bench.nominal(scalar(0.1999)));
    CHECK(traj.min_phi() >= 0.0);
    CHECK(traj.count_violations() == 0);
}

TEST_CASE("filtered closed loop recovers within the stated bound from outside") {
    const auto bench = linear1d();
    FilterConfig fc;
    fc.theta = 0.001;
    fc.eta = 1.0;
    const IntegratorConfig cfg{2.5e-4, IntegrationMethod::rk4, 1.0};
    auto ctrl = filtered_controller(fc, scalar_model(), bench.barrier, bench.nominal);
    const auto traj = simulate(bench.sys, cfg, bench.barrier, ctrl, scalar(0.25),
                               bench.nominal(scalar(0.25)));
    const auto rec = traj.first_time_phi_at_least(fc.theta);
    REQUIRE(rec.has_value());
    const double bound = (fc.theta - (-0.5625)) / fc.eta + 5.0 * cfg.dt;
    CHECK(*rec <= bound);
}

TEST_CASE("filtered scalar system stays in a compact set over a long horizon") {
    const auto bench = linear1d();
    FilterConfig fc;
    fc.theta = 0.001;
    fc.eta = 1.0;
    const IntegratorConfig cfg{2.5e-4, IntegrationMethod::rk4, 5.0};
    auto ctrl = filtered_controller(fc, scalar_model(), bench.barrier, bench.nominal);
    const auto traj = simulate(bench.sys, cfg, bench.barrier, ctrl, scalar(0.1999),
                               bench.nominal(scalar(0.1999)));
    double max_abs = 0.0;
    for (const auto& s : traj.samples) max_abs = std::max(max_abs, std::abs(s.x(0)));
    CHECK(max_abs <= 0.21);
}

TEST_CASE("linear1d returns the published pieces") {
    const auto bench = linear1d();
    CHECK(bench.sys.drift(scalar(0.1))(0) == doctest::Approx(0.15));
    CHECK(bench.sys.actuation(scalar(123.0))(0, 0) == doctest::Approx(1.0));
    CHECK(bench.nominal(scalar(0.2))(0) == doctest::Approx(-0.2));
    CHECK(bench.barrier.value(scalar(0.2)) == doctest::Approx(0.0));
}

TEST_CASE("bicycle2d agrees with its SVD factorization") {
    const double m = 1.3, a1 = 0.9, a2 = 1.2, iz = 1.5, u = 4.0, cf = 2.1, cr = 1.8;
    const auto sys = bicycle2d(m, a1, a2, iz, u, cf, cr);
    const auto [model, act] = bicycle_svd(m, a1, iz, cf);
    const Eigen::MatrixXd g = sys.actuation(Eigen::Vector2d::Zero());
    CHECK((g - true_g(model, act)).cwiseAbs().maxCoeff() < 1e-12);

    // Linear system: zero state and zero steering stay put.
    CHECK(sys.drift(Eigen::Vector2d::Zero()).norm() == doctest::Approx(0.0));

    // Steering left from rest raises the yaw rate.
    const IntegratorConfig cfg{1e-3, IntegrationMethod::rk4, 1e-3};
    const StateVec next = step(sys, cfg, Eigen::Vector2d::Zero(), scalar(0.2));
    CHECK(next(1) > 0.0);
}

TEST_CASE("vehicle4d stated values") {
    const auto bench = vehicle4d();

    const double phi0 = phi_eval(bench.barrier, StateVec::Zero(4));
    const double exact = 200.0 - 4.0 * std::pow(50.0 * M_PI, 2) - 0.001 * 2.5 * 2.5;
    CHECK(phi0 == doctest::Approx(exact).epsilon(1e-12));
    CHECK(phi0 == doctest::Approx(-98496.05).epsilon(1e-6));

    // Removable singularity: the psi-row derivative at psi = 0 equals V_y + Vx*psi -> handled.
    StateVec x = StateVec::Zero(4);
    x(0) = 1.0;
    x(2) = 0.0;
    CHECK(bench.sys.drift(x)(3) == doctest::Approx(1.0));  // cos(0)*V_y + Vx*sin(0)
    x(2) = 1e-9;
    CHECK(std::isfinite(bench.sys.drift(x)(3)));
    x(2) = 0.5;
    CHECK(bench.sys.drift(x)(3) == doctest::Approx(std::cos(0.5) * 1.0 + 5.0 * std::sin(0.5)));

    // Terminal reward fires inside the psi window and stops the episode.
    StateVec near_goal = StateVec::Zero(4);
    near_goal(2) = M_PI / 2.0 - 0.01;
    const auto [r, terminal] = bench.reward(StateVec::Zero(4), near_goal);
    CHECK(r == doctest::Approx(7000.0));
    CHECK(terminal);

    // Outside the window: the shaping reward on the current psi.
    StateVec far = StateVec::Zero(4);
    const auto [r2, t2] = bench.reward(far, far);
    const double d = 0.0 - M_PI / 2.0;
    CHECK_FALSE(t2);
    CHECK(r2 == doctest::Approx(-4.0 + 0.25 / (d * d + 0.0001)));

    // Cost saturates at 0.1.
    CHECK(bench.cost(StateVec::Zero(4)) == doctest::Approx(0.1));

    // State clip holds V_y and r inside the stated boxes.
    const IntegratorConfig cfg{0.02, IntegrationMethod::euler, 0.02};
    StateVec wild = StateVec::Zero(4);
    wild(0) = 6.9;
    wild(1) = 349.0;
    const StateVec clipped = step(bench.sys, cfg, wild, scalar(100.0));
    CHECK(clipped(0) <= 7.0);
    CHECK(clipped(1) <= 350.0);
}

TEST_CASE("left-derivative finite difference converges at first order") {
    const auto bench = linear1d();
    const auto run = [&](double dt) {
        const IntegratorConfig cfg{dt, IntegrationMethod::euler, 0.1};
        const auto traj = simulate(bench.sys, cfg, bench.barrier,
                                   state_feedback(bench.nominal), scalar(0.15));
        double worst = 0.0;
        for (std::size_t n = 1; n < traj.samples.size(); ++n) {
            const auto& prev = traj.samples[n - 1];
            const auto& cur = traj.samples[n];
            const double fd = (cur.x(0) - prev.x(0)) / dt;
            const double oracle =
                bench.sys.drift(cur.x)(0) + (bench.sys.actuation(cur.x) * prev.u)(0);
            worst = std::max(worst, std::abs(fd - oracle));
        }
        return worst;
    };
    const double e1 = run(2e-3);
    const double e2 = run(1e-3);
    CHECK(e1 > 0.0);
    CHECK(e2 / e1 == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("right-derivative chain rule holds at first order, control jumps included") {
    const auto bench = linear1d();
    FilterConfig fc;
    fc.theta = 0.001;
    fc.eta = 1.0;
    const auto run = [&](double dt) {
        const IntegratorConfig cfg{dt, IntegrationMethod::euler, 0.1};
        auto ctrl = filtered_controller(fc, scalar_model(), bench.barrier, bench.nominal);
        const auto traj = simulate(bench.sys, cfg, bench.barrier, ctrl, scalar(0.1999),
                                   bench.nominal(scalar(0.1999)));
        bool saw_jump = false;
        double worst = 0.0;
        for (std::size_t n = 0; n + 1 < traj.samples.size(); ++n) {
            const auto& cur = traj.samples[n];
            const auto& next = traj.samples[n + 1];
            const double fd = (next.phi - cur.phi) / dt;
            const StateVec xdot =
                bench.sys.drift(cur.x) + bench.sys.actuation(cur.x) * cur.u;
            const double analytic = bench.barrier.gradient(cur.x).dot(xdot);
            worst = std::max(worst, std::abs(fd - analytic));
            if (n > 0 && traj.samples[n - 1].activated != cur.activated) saw_jump = true;
        }
        CHECK(saw_jump);  // the filter toggles along the boundary
        return worst;
    };
    const double e1 = run(2.5e-4);
    const double e2 = run(1.25e-4);
    CHECK(e1 > 0.0);
    CHECK(e2 / e1 == doctest::Approx(0.5).epsilon(0.25));
}

TEST_CASE("benchmark right-hand sides have bounded difference ratios") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const auto check_lipschitz = [&](const AffineSystem& sys, double scale, double bound) {
        for (int i = 0; i < 200; ++i) {
            StateVec a(sys.dim_state), b(sys.dim_state);
            for (int j = 0; j < sys.dim_state; ++j) {
                a(j) = scale * unif(rng);
                b(j) = scale * unif(rng);
            }
            if ((a - b).norm() < 1e-9) continue;
            const double ratio = (sys.drift(a) - sys.drift(b)).norm() / (a - b).norm();
            CHECK(ratio < bound);
            const double gratio =
                (sys.actuation(a) - sys.actuation(b)).norm() / (a - b).norm();
            CHECK(gratio < bound);
        }
    };
    check_lipschitz(linear1d().sys, 1.0, 10.0);
    check_lipschitz(bicycle2d(1.3, 0.9, 1.2, 1.5, 4.0, 2.1, 1.8), 2.0, 100.0);
    check_lipschitz(vehicle4d().sys, 5.0, 100.0);
}

TEST_CASE("simulation faults carry the partial trajectory") {
    AffineSystem blowup;
    blowup.dim_state = 1;
    blowup.dim_action = 1;
    blowup.drift = [](const StateVec& x) { return StateVec(x.array().square().matrix() * 1e8); };
    blowup.actuation = [](const StateVec&) { return Eigen::MatrixXd::Identity(1, 1); };
    BarrierFunction phi;
    phi.dim = 1;
    phi.value = [](const StateVec&) { return 1.0; };
    phi.gradient = [](const StateVec&) { return scalar(0.0); };
    const IntegratorConfig cfg{0.5, IntegrationMethod::euler, 50.0};
    try {
        simulate(blowup, cfg, phi, state_feedback([](const StateVec&) { return scalar(0.0); }),
                 scalar(10.0));
        FAIL("expected a simulation fault");
    } catch (const SimulationFault& fault) {
        CHECK(!fault.partial.samples.empty());
    }
}

TEST_CASE("integrator config validation") {
    IntegratorConfig cfg{0.0, IntegrationMethod::euler, 1.0};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.dt = 0.1;
    cfg.horizon = 0.05;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

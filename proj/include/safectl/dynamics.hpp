#pragma once

#include "safectl/core.hpp"
#include "safectl/filter.hpp"
#include "safectl/uncertainty.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace safectl {

/// Control-affine plant xdot = f(x) + g(x) u. The drift and the true
/// actuation values are simulator-side knowledge; controllers only ever see
/// g through an SvdUncertaintyModel.
struct AffineSystem {
    int dim_state = 0;
    int dim_action = 0;
    std::function<Eigen::VectorXd(const StateVec&)> drift;
    std::function<Eigen::MatrixXd(const StateVec&)> actuation;
    /// Post-step saturation box (per coordinate), applied outside the
    /// integrator stages.
    std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> state_clip;
};

enum class IntegrationMethod { euler, rk4 };

struct IntegratorConfig {
    double dt = 0.0;
    IntegrationMethod method = IntegrationMethod::rk4;
    double horizon = 0.0;

    void validate() const;
};

struct TrajectorySample {
    double t;
    StateVec x;
    ActionVec u;
    double phi;
    bool activated;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;

    double min_phi() const;
    /// Fraction of samples with phi >= 0.
    double safety_rate() const;
    /// Time of the first sample with phi >= theta, if any.
    std::optional<double> first_time_phi_at_least(double theta) const;
    std::size_t count_violations() const;  // samples with phi < 0
};

/// Non-finite state encountered mid-run; carries whatever was simulated so
/// the harness can dump it.
struct SimulationFault : std::runtime_error {
    Trajectory partial;
    SimulationFault(const std::string& what, Trajectory traj)
        : std::runtime_error(what), partial(std::move(traj)) {}
};

/// One zero-order-hold step: u is frozen over [t, t+dt]. Euler or classical
/// RK4, then the saturation box.
StateVec step(const AffineSystem& sys, const IntegratorConfig& cfg, const StateVec& x,
              const ActionVec& u);

struct ControlDecision {
    ActionVec u;
    bool activated = false;
};

/// Controllers see the current time and the two-sample window, nothing else.
using Controller = std::function<ControlDecision(double t, const InformationWindow&)>;

/// Closed-loop roll-out over cfg.horizon. The window passed to the controller
/// carries delta = dt; at t = 0 it holds x_prev = x0 and u_last = u_init.
/// Samples are recorded at every control instant plus the terminal state.
Trajectory simulate(const AffineSystem& sys, const IntegratorConfig& cfg,
                    const BarrierFunction& barrier, const Controller& controller,
                    const StateVec& x0, const ActionVec& u_init);

Trajectory simulate(const AffineSystem& sys, const IntegratorConfig& cfg,
                    const BarrierFunction& barrier, const Controller& controller,
                    const StateVec& x0);

/// Wraps a plain state-feedback law as a Controller.
Controller state_feedback(std::function<ActionVec(const StateVec&)> law);

/// Wraps the correction controller around a nominal state-feedback law.
/// The left derivative defaults to the window finite difference; property
/// tests may substitute an oracle source. Diagnostics are appended to
/// diag_log when provided. On the first call the internal state initializes
/// with u_last = nominal(x0).
Controller filtered_controller(
    FilterConfig cfg, SvdUncertaintyModel model, BarrierFunction barrier,
    std::function<ActionVec(const StateVec&)> nominal,
    std::shared_ptr<std::vector<CorrectionDiagnostics>> diag_log = nullptr,
    std::function<StateVec(const InformationWindow&)> xdot_source = nullptr);

/// Scalar benchmark: xdot = 1.5 x + u, nominal u = -x (closed loop 0.5 x,
/// exponentially unstable), safe set [-0.2, 0.2] via phi = 1 - 25 x^2.
struct Linear1dBenchmark {
    AffineSystem sys;
    std::function<ActionVec(const StateVec&)> nominal;
    BarrierFunction barrier;
};
Linear1dBenchmark linear1d();

/// Planar bicycle yaw dynamics, state [v, r], steering input. Parameters:
/// mass, front/rear axle distances, yaw inertia, forward speed, and the two
/// cornering stiffnesses (hidden from controllers).
AffineSystem bicycle2d(double m, double a1, double a2, double iz, double u_speed,
                       double cf_hidden, double cr_hidden);

/// Four-state vehicle benchmark: state [V_y, r, psi, y], scalar steering.
/// Ships the stated barrier, reward (with terminal right-turn predicate),
/// per-step safety cost, and the rank-one actuation uncertainty model.
struct Vehicle4dBenchmark {
    AffineSystem sys;
    BarrierFunction barrier;
    /// Reward for transition (s_n -> s_next); second member is the terminal
    /// ("task accomplished") flag.
    std::function<std::pair<double, bool>(const StateVec& s, const StateVec& s_next)> reward;
    /// Safety cost of the reached state (logged only, never optimized).
    std::function<double(const StateVec& s_next)> cost;
    SvdUncertaintyModel model;
    TrueActuation true_act;
};
Vehicle4dBenchmark vehicle4d(double m = 100.0, double iz = 20.0, double a = 1.0,
                             double c_alpha_f = 10.0, double c0 = 70.0, double c1 = 40.0,
                             double c2 = 180.0, double v_speed = 5.0,
                             double lambda_lower_ratio = 0.2, double lambda_upper_ratio = 5.0);

/// Builds a plant whose actuation is exactly U diag(lambda_true) V^T, for
/// oracle tests that randomize the hidden singular values.
AffineSystem system_from_svd(std::function<Eigen::VectorXd(const StateVec&)> drift,
                             const SvdUncertaintyModel& model, const TrueActuation& act);

}  // namespace safectl

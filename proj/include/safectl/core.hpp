#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace safectl {

using StateVec = Eigen::VectorXd;
using ActionVec = Eigen::VectorXd;

/// Bad configuration or malformed input (dimension mismatches, invalid
/// parameter ranges, unparsable config files). Maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Violated hypothesis inside the correction pipeline (e.g. a zero barrier
/// gradient at an activated state).
struct FilterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Scalar barrier function with its gradient. Safety is phi(x) >= 0; the
/// gradient must agree with central finite differences (see grad_check), i.e.
/// phi is continuously differentiable on the region of interest.
struct BarrierFunction {
    int dim = 0;
    std::function<double(const StateVec&)> value;
    std::function<StateVec(const StateVec&)> gradient;
};

/// Barrier with a central finite-difference gradient of step h. Shipped
/// benchmarks define analytic gradients; this is the fallback for quick
/// experiments where an analytic gradient is not worth writing.
BarrierFunction with_fd_gradient(int dim, std::function<double(const StateVec&)> value,
                                 double h = 1e-6);

/// phi(x). Throws ConfigError on dimension mismatch.
double phi_eval(const BarrierFunction& b, const StateVec& x);

/// Max relative error between the analytic gradient and a central finite
/// difference with step h: the sup-norm of the difference over
/// max(1, sup-norm of the analytic gradient).
double grad_check(const BarrierFunction& b, const StateVec& x, double h);

/// Theta-super-level set of a barrier: { x : phi(x) >= theta }.
struct SafeSubset {
    BarrierFunction barrier;
    double theta = 0.0;

    SafeSubset(BarrierFunction b, double theta_);
    bool contains(const StateVec& x) const { return barrier.value(x) >= theta; }
};

/// theta - phi(x), clamped to 0 on and inside the subset. The harness calls
/// this unconditionally when logging recovery metrics.
double distance_to_subset(const SafeSubset& s, const StateVec& x);

/// The two-sample information window: the current state, the state exactly
/// delta seconds earlier, and the action held over that interval. This is the
/// only history the correction controller may read.
struct InformationWindow {
    StateVec x_now;
    StateVec x_prev;
    ActionVec u_last;
    double delta = 0.0;

    InformationWindow(StateVec now, StateVec prev, ActionVec last, double delta_);

    /// Backward finite difference (x_now - x_prev)/delta, the default
    /// left-derivative estimate.
    StateVec xdot_minus() const { return (x_now - x_prev) / delta; }
};

}  // namespace safectl

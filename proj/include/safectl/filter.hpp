#pragma once

#include "safectl/core.hpp"
#include "safectl/uncertainty.hpp"

#include <optional>
#include <utility>

namespace safectl {

/// Hyper-parameters of the correction controller.
///
/// theta is the activation threshold (the filter protects the theta-super-level
/// set of the barrier), eta the guaranteed recovery speed dphi/dt while active,
/// slack the margin that turns the strict target inequalities into closed ones,
/// and xdot_tol the norm below which the observed left derivative is treated
/// as zero. An optional box clamp can be applied to the corrected action; when
/// it binds, the descent guarantee no longer holds and diagnostics say so.
struct FilterConfig {
    double theta = 0.0;
    double eta = 0.0;
    double slack = 1e-3;
    double xdot_tol = 1e-9;
    std::optional<double> clip_low;
    std::optional<double> clip_high;
    /// Replication mode: use this fixed matrix as Gamma instead of solving the
    /// per-step target problem. The correction becomes
    /// u_last - g_hat^+ * frozen_gamma * xdot_minus.
    std::optional<Eigen::MatrixXd> frozen_gamma;

    void validate() const;
};

/// Mutable per-loop state: the last committed action and the previous state
/// sample. Updated exactly once per control step, after the action commits.
struct FilterState {
    ActionVec u_last;
    StateVec x_prev;
    double t_prev = 0.0;
};

/// Everything the correction step computed, for logging and property tests.
/// epsilon_lb holds, per controllable direction, the worst-case value of
/// alpha*beta_i - (lambda_i/lambda_hat_i)*z_i over the admissible singular
/// value interval — the term whose product with beta_i enters the descent sum,
/// so beta_i * epsilon_lb_i >= 0 certifies the step.
struct CorrectionDiagnostics {
    bool activated = false;
    double alpha = 0.0;
    Eigen::VectorXd beta;        // all d coordinates of grad phi in the U basis
    Eigen::VectorXd target;      // y, the state-basis correction target
    std::optional<Eigen::MatrixXd> gamma;
    Eigen::VectorXd epsilon_lb;  // one per controllable direction (rank entries)
    bool clipped = false;
};

/// beta_i = <grad phi(x), U_i> for i = 1..d. Throws FilterError when the
/// gradient vanishes (the forward-persistence guarantee requires a nonzero
/// gradient wherever the filter acts).
Eigen::VectorXd compute_beta(const BarrierFunction& b, const SvdUncertaintyModel& model,
                             const StateVec& x);

/// alpha = (<grad phi(x), xdot_minus> - eta) / |grad phi(x)|^2.
double compute_alpha(const BarrierFunction& b, const StateVec& x, const StateVec& xdot_minus,
                     double eta);

/// Target coordinates z_i = <U_i, y> for the controllable directions
/// i = 1..rank, chosen strictly inside the sign-dependent constraint region:
///   beta_i > 0:  z_i = alpha*beta_i/M_i - slack  (alpha >= 0)
///                z_i = alpha*beta_i/m_i - slack  (alpha <  0)
///   beta_i < 0:  z_i = alpha*beta_i/m_i + slack  (alpha <= 0)
///                z_i = alpha*beta_i/M_i + slack  (alpha >  0)
///   beta_i = 0:  z_i = 0 (the direction contributes nothing to the sum).
Eigen::VectorXd solve_target(double alpha, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& lower_ratio,
                             const Eigen::VectorXd& upper_ratio, double slack);

/// A rank-one Gamma with Gamma * xdot_minus = y, for diagnostics. Returns
/// nullopt when |xdot_minus| <= xdot_tol: no matrix can reach a nonzero y
/// from a zero left derivative, so the target is applied directly instead.
std::optional<Eigen::MatrixXd> solve_gamma(const Eigen::VectorXd& target_y,
                                           const StateVec& xdot_minus, double xdot_tol);

/// u_corr = u_last - g_hat^+ * y.
ActionVec correction_control(const FilterState& state, const SvdUncertaintyModel& model,
                             const Eigen::VectorXd& target_y);

/// The correction branch alone: beta/alpha/target/correction from the
/// two-sample information, with the optional frozen Gamma and output clamp
/// applied. Does not consult the trigger threshold.
std::pair<ActionVec, CorrectionDiagnostics> correction_step(const FilterConfig& cfg,
                                                            const ActionVec& u_last,
                                                            const SvdUncertaintyModel& model,
                                                            const BarrierFunction& b,
                                                            const StateVec& x,
                                                            const StateVec& xdot_minus);

/// One control step. Passes u_nom through untouched (bitwise) while
/// phi(x) > theta; otherwise runs the correction pipeline. The state is
/// updated afterwards in both branches: u_last <- the returned action,
/// x_prev <- x.
std::pair<ActionVec, CorrectionDiagnostics> filter_step(const FilterConfig& cfg, FilterState& fs,
                                                        const SvdUncertaintyModel& model,
                                                        const BarrierFunction& b,
                                                        const StateVec& x,
                                                        const StateVec& xdot_minus,
                                                        const ActionVec& u_nom);

/// The drift that defeats any single-sample policy: given the action u0 the
/// policy plays at a boundary state x0, f(x0) = -grad phi(x0) - g(x0) u0
/// makes dphi/dt at x0 equal to -|grad phi(x0)|^2 < 0, so the very next
/// instant is unsafe. Throws FilterError when grad phi(x0) = 0.
Eigen::VectorXd adversarial_f(const BarrierFunction& b,
                              const std::function<Eigen::MatrixXd(const StateVec&)>& actuation,
                              const StateVec& x0, const ActionVec& u0);

}  // namespace safectl

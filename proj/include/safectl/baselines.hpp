#pragma once

#include "safectl/core.hpp"
#include "safectl/dynamics.hpp"

#include <vector>

namespace safectl::baselines {

// Comparison controllers for the scalar benchmark. Each adaptive law models
// the plant as xdot = f(x) + F(x)*theta + u with f(x) = x, F(x) = x and the
// hidden theta* = 0.5 (so the open loop is the benchmark's 1.5x + u), and
// filters against phi_a(x) = 1 - 25 x^2.

/// Adaptive-CBF state: estimate theta_hat driven by theta_hat' = Gamma * 50 x^2.
struct AcbfState {
    double theta_hat = 0.0;
    double gamma_rate = 5.0;
};

/// Scalar aCBF step. Constraint -50x [x + theta_hat*x + u] >= 0, solved as a
/// projection of u_nom onto the feasible half-line; theta_hat then advances
/// one Euler step of the adaptation law.
double acbf_control(AcbfState& s, double x, double u_nom, double dt);

/// Robust aCBF state. nu_tilde bounds |theta* - theta_hat|; SMID keeps the
/// interval [r_min, r_max] of parameter values consistent with observed data.
struct RacbfState {
    double theta_hat = 0.0;
    double gamma_rate = 5.0;
    double nu_tilde = 2.0;
    double d_bound = 0.07;
    // Prior interval theta_hat +/- nu_tilde; SMID can only shrink it.
    double r_min = -2.0;
    double r_max = 2.0;
    bool smid_inconsistent = false;

    /// Robustness margin added to the constraint right side; nu^2/(2*Gamma)
    /// equals the stated 2/5 at nu=2, Gamma=5 and relaxes as SMID shrinks nu.
    double tightening() const { return nu_tilde * nu_tilde / (2.0 * gamma_rate); }
};

/// Scalar RaCBF step: same constraint tightened to >= -phi_a(x) + tightening.
double racbf_control(RacbfState& s, double x, double u_nom, double phi_a, double dt);

/// One observed transition for set-membership identification: xdot is the
/// finite-difference estimate at state x under action u.
struct SmidSample {
    double x;
    double u;
    double xdot;
};

/// Intersects the per-sample consistent intervals |xdot - x - x*theta - u| <= D
/// into [r_min, r_max] and recomputes nu_tilde. An empty intersection keeps
/// the previous interval and sets smid_inconsistent.
void smid_update(RacbfState& s, const std::vector<SmidSample>& samples);

/// Convex-body-chasing over discrete-time parameters (alpha, beta) with
/// x_{i+1} ~ alpha x_i + beta u_i. The consistent set is kept as a convex
/// polygon (clipped by two half-planes per sample); the candidate is the
/// Euclidean projection of its predecessor onto the current polygon.
struct CbcState {
    double eta_slack = 1e-6;
    Eigen::Vector2d candidate;                     // (alpha, beta)
    std::vector<Eigen::Vector2d> polygon;          // CCW vertex list
    std::vector<Eigen::Vector3d> constraints;      // rows (a, b, c): a*al + b*be <= c
    bool empty_clip_warned = false;
};

CbcState make_cbc(double alpha_box = 5.0, double beta_min = 2.5e-6, double beta_max = 0.05,
                  double eta_slack = 1e-6);

/// Feeds one transition (x_i, u_i, x_{i+1}); clips the polygon by the two new
/// half-planes and re-projects the candidate.
void cbc_observe(CbcState& s, double x_i, double u_i, double x_next);

/// u = -(alpha/beta) x for the current candidate.
double cbc_control(const CbcState& s, double x);

/// Euclidean projection of a point onto the polygon (exposed for tests).
Eigen::Vector2d project_onto_polygon(const std::vector<Eigen::Vector2d>& polygon,
                                     const Eigen::Vector2d& point);

enum class BaselineKind { acbf, racbf, racbfs, cbc };
const char* baseline_name(BaselineKind k);
BaselineKind baseline_from_name(const std::string& name);

struct BaselineParams {
    double gamma_rate = 5.0;
    double nu_tilde0 = 2.0;
    double d_bound = 0.07;
    double smid_period = 2.5e-3;
    double cbc_alpha_box = 5.0;
    double cbc_beta_min = 2.5e-6;
    double cbc_beta_max = 0.05;
    double cbc_eta = 1e-6;
};

/// Ready-to-simulate controller for the scalar benchmark (nominal u = -x).
Controller make_baseline_controller(BaselineKind kind, double dt,
                                    const BaselineParams& params = {});

}  // namespace safectl::baselines

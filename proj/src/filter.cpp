#include "safectl/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace safectl {

void FilterConfig::validate() const {
    if (!(theta > 0.0)) throw ConfigError("filter theta must be > 0");
    if (!(eta > 0.0)) throw ConfigError("filter eta must be > 0");
    if (!(slack > 0.0)) throw ConfigError("filter slack must be > 0");
    if (xdot_tol < 0.0) throw ConfigError("filter xdot_tol must be >= 0");
    if (clip_low && clip_high && *clip_low > *clip_high) {
        throw ConfigError("filter clip bounds are inverted");
    }
}

namespace {

StateVec checked_gradient(const BarrierFunction& b, const StateVec& x) {
    StateVec g = b.gradient(x);
    if (!(g.squaredNorm() > 0.0)) {
        throw FilterError("barrier gradient vanishes at an activated state");
    }
    return g;
}

}  // namespace

Eigen::VectorXd compute_beta(const BarrierFunction& b, const SvdUncertaintyModel& model,
                             const StateVec& x) {
    const StateVec g = checked_gradient(b, x);
    return model.u_factor.transpose() * g;
}

double compute_alpha(const BarrierFunction& b, const StateVec& x, const StateVec& xdot_minus,
                     double eta) {
    const StateVec g = checked_gradient(b, x);
    return (g.dot(xdot_minus) - eta) / g.squaredNorm();
}

Eigen::VectorXd solve_target(double alpha, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& lower_ratio,
                             const Eigen::VectorXd& upper_ratio, double slack) {
    if (!(slack > 0.0)) throw ConfigError("solve_target: slack must be > 0");
    if (beta.size() != lower_ratio.size() || beta.size() != upper_ratio.size()) {
        throw ConfigError("solve_target: bound vectors must match beta");
    }
    Eigen::VectorXd z(beta.size());
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
        const double bi = beta(i);
        if (bi == 0.0) {
            z(i) = 0.0;
        } else if (bi > 0.0) {
            const double ratio = (alpha >= 0.0) ? upper_ratio(i) : lower_ratio(i);
            z(i) = alpha * bi / ratio - slack;
        } else {
            const double ratio = (alpha <= 0.0) ? lower_ratio(i) : upper_ratio(i);
            z(i) = alpha * bi / ratio + slack;
        }
    }
    return z;
}

std::optional<Eigen::MatrixXd> solve_gamma(const Eigen::VectorXd& target_y,
                                           const StateVec& xdot_minus, double xdot_tol) {
    const double n2 = xdot_minus.squaredNorm();
    if (std::sqrt(n2) <= xdot_tol) return std::nullopt;
    return Eigen::MatrixXd(target_y * xdot_minus.transpose() / n2);
}

ActionVec correction_control(const FilterState& state, const SvdUncertaintyModel& model,
                             const Eigen::VectorXd& target_y) {
    return state.u_last - g_hat_pinv(model) * target_y;
}

namespace {

Eigen::VectorXd epsilon_lower_bounds(double alpha, const Eigen::VectorXd& beta_k,
                                     const Eigen::VectorXd& z,
                                     const SvdUncertaintyModel& model) {
    // Worst case of alpha*beta_i - rho*z_i over rho in [m_i, M_i]: worst means
    // the extreme that minimizes beta_i * epsilon_i.
    Eigen::VectorXd eps(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double hi_rho = z(i) > 0.0 ? model.upper_ratio(i) : model.lower_ratio(i);
        const double lo_rho = z(i) > 0.0 ? model.lower_ratio(i) : model.upper_ratio(i);
        const double eps_min = alpha * beta_k(i) - hi_rho * z(i);
        const double eps_max = alpha * beta_k(i) - lo_rho * z(i);
        if (beta_k(i) > 0.0) {
            eps(i) = eps_min;
        } else if (beta_k(i) < 0.0) {
            eps(i) = eps_max;
        } else {
            eps(i) = 0.0;
        }
    }
    return eps;
}

}  // namespace

std::pair<ActionVec, CorrectionDiagnostics> correction_step(const FilterConfig& cfg,
                                                            const ActionVec& u_last,
                                                            const SvdUncertaintyModel& model,
                                                            const BarrierFunction& b,
                                                            const StateVec& x,
                                                            const StateVec& xdot_minus) {
    CorrectionDiagnostics diag;
    diag.activated = true;
    const int k = model.rank();
    diag.beta = compute_beta(b, model, x);
    diag.alpha = compute_alpha(b, x, xdot_minus, cfg.eta);

    Eigen::VectorXd z;
    if (cfg.frozen_gamma) {
        diag.gamma = *cfg.frozen_gamma;
        diag.target = *cfg.frozen_gamma * xdot_minus;
        z = (model.u_factor.transpose() * diag.target).head(k);
    } else {
        z = solve_target(diag.alpha, diag.beta.head(k), model.lower_ratio, model.upper_ratio,
                         cfg.slack);
        diag.target = model.u_factor.leftCols(k) * z;
        diag.gamma = solve_gamma(diag.target, xdot_minus, cfg.xdot_tol);
    }
    diag.epsilon_lb = epsilon_lower_bounds(diag.alpha, diag.beta.head(k), z, model);

    FilterState scratch{u_last, x, 0.0};
    ActionVec u = correction_control(scratch, model, diag.target);
    if (cfg.clip_low || cfg.clip_high) {
        const double lo = cfg.clip_low.value_or(-std::numeric_limits<double>::infinity());
        const double hi = cfg.clip_high.value_or(std::numeric_limits<double>::infinity());
        ActionVec clipped = u.cwiseMax(lo).cwiseMin(hi);
        diag.clipped = (clipped != u);
        u = std::move(clipped);
    }
    return {std::move(u), std::move(diag)};
}

std::pair<ActionVec, CorrectionDiagnostics> filter_step(const FilterConfig& cfg, FilterState& fs,
                                                        const SvdUncertaintyModel& model,
                                                        const BarrierFunction& b,
                                                        const StateVec& x,
                                                        const StateVec& xdot_minus,
                                                        const ActionVec& u_nom) {
    if (phi_eval(b, x) > cfg.theta) {
        fs.u_last = u_nom;
        fs.x_prev = x;
        return {u_nom, CorrectionDiagnostics{}};
    }
    auto [u, diag] = correction_step(cfg, fs.u_last, model, b, x, xdot_minus);
    fs.u_last = u;
    fs.x_prev = x;
    return {std::move(u), std::move(diag)};
}

Eigen::VectorXd adversarial_f(const BarrierFunction& b,
                              const std::function<Eigen::MatrixXd(const StateVec&)>& actuation,
                              const StateVec& x0, const ActionVec& u0) {
    const StateVec g = b.gradient(x0);
    if (!(g.squaredNorm() > 0.0)) {
        throw FilterError("adversarial drift needs a nonzero barrier gradient");
    }
    return -g - actuation(x0) * u0;
}

}  // namespace safectl

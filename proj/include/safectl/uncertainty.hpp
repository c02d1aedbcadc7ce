#pragma once

#include "safectl/core.hpp"

#include <Eigen/Dense>

#include <utility>

namespace safectl {

/// What the controller is allowed to know about the actuation matrix
/// g(x) = U diag(lambda) V^T: the orthogonal factors exactly, and each
/// singular value only through a positive estimate lambda_hat_i with
/// multiplicative bounds m_i * lambda_hat_i <= lambda_i <= M_i * lambda_hat_i.
struct SvdUncertaintyModel {
    Eigen::MatrixXd u_factor;    // d x d, orthogonal
    Eigen::MatrixXd v_factor;    // p x p, orthogonal
    Eigen::VectorXd lambda_hat;  // k positive estimates
    Eigen::VectorXd lower_ratio; // m_i > 0
    Eigen::VectorXd upper_ratio; // M_i >= m_i

    int dim_state() const { return static_cast<int>(u_factor.rows()); }
    int dim_action() const { return static_cast<int>(v_factor.rows()); }
    int rank() const { return static_cast<int>(lambda_hat.size()); }

    /// Validates orthogonality (max-norm deviation from identity < 1e-9),
    /// positivity of the estimates and 0 < m_i <= M_i.
    static SvdUncertaintyModel make(Eigen::MatrixXd u, Eigen::MatrixXd v,
                                    Eigen::VectorXd lambda_hat,
                                    Eigen::VectorXd lower_ratio,
                                    Eigen::VectorXd upper_ratio);
};

/// The hidden true singular values. Only the simulator and test oracles may
/// hold one of these; the filter cannot read it by construction.
struct TrueActuation {
    Eigen::VectorXd lambda_true;

    /// Validates lambda against the model's multiplicative bounds.
    static TrueActuation make(const SvdUncertaintyModel& model, Eigen::VectorXd lambda);
};

/// Sigma_hat: d x p diagonal of the estimates.
Eigen::MatrixXd sigma_hat(const SvdUncertaintyModel& model);

/// Moore-Penrose pseudo-inverse of Sigma_hat: p x d with 1/lambda_hat_i on
/// the leading diagonal.
Eigen::MatrixXd sigma_hat_pinv(const SvdUncertaintyModel& model);

/// g_hat^+ = V Sigma_hat^+ U^T (p x d).
Eigen::MatrixXd g_hat_pinv(const SvdUncertaintyModel& model);

/// The simulator-side reconstruction U diag(lambda_true) V^T (d x p).
Eigen::MatrixXd true_g(const SvdUncertaintyModel& model, const TrueActuation& act);

/// Yaw dynamics of a bicycle: the actuation column [c_f/m, c_f*a1/I_z]^T has
/// the exact rank-one SVD with
///   U = [[l1/l, l2/l], [l2/l, -l1/l]],  V = [1],  l = sqrt(l1^2 + l2^2),
/// where l1 = c_f/m and l2 = c_f*a1/I_z. The ratios l1/l, l2/l do not depend
/// on the hidden stiffness c_f, so U is known even when c_f is not; lambda is
/// returned as a ratio-bounded guess lambda_hat = guess_scale * l with bounds
/// that must bracket the truth.
std::pair<SvdUncertaintyModel, TrueActuation> bicycle_svd(double m_mass, double a1, double iz,
                                                          double cf_hidden,
                                                          double guess_scale = 1.0,
                                                          double lower_ratio = 0.5,
                                                          double upper_ratio = 2.0);

}  // namespace safectl

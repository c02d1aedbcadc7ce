#include "safectl/uncertainty.hpp"

#include <cmath>

namespace safectl {

namespace {

constexpr double kOrthoTol = 1e-9;

void require_orthogonal(const Eigen::MatrixXd& m, const char* name) {
    if (m.rows() != m.cols()) throw ConfigError(std::string(name) + " factor must be square");
    const Eigen::MatrixXd gram = m.transpose() * m;
    const double dev = (gram - Eigen::MatrixXd::Identity(m.rows(), m.cols()))
                           .cwiseAbs()
                           .maxCoeff();
    if (dev >= kOrthoTol) {
        throw ConfigError(std::string(name) + " factor is not orthogonal (deviation " +
                          std::to_string(dev) + ")");
    }
}

}  // namespace

SvdUncertaintyModel SvdUncertaintyModel::make(Eigen::MatrixXd u, Eigen::MatrixXd v,
                                              Eigen::VectorXd lambda_hat,
                                              Eigen::VectorXd lower_ratio,
                                              Eigen::VectorXd upper_ratio) {
    require_orthogonal(u, "U");
    require_orthogonal(v, "V");
    const auto k = lambda_hat.size();
    if (k > std::min(u.rows(), v.rows())) throw ConfigError("rank exceeds min(d, p)");
    if (lower_ratio.size() != k || upper_ratio.size() != k) {
        throw ConfigError("ratio bound vectors must match the number of singular values");
    }
    for (Eigen::Index i = 0; i < k; ++i) {
        if (!(lambda_hat(i) > 0.0)) throw ConfigError("singular value estimates must be positive");
        if (!(lower_ratio(i) > 0.0) || !(upper_ratio(i) >= lower_ratio(i))) {
            throw ConfigError("ratio bounds must satisfy 0 < m_i <= M_i");
        }
    }
    return SvdUncertaintyModel{std::move(u), std::move(v), std::move(lambda_hat),
                               std::move(lower_ratio), std::move(upper_ratio)};
}

TrueActuation TrueActuation::make(const SvdUncertaintyModel& model, Eigen::VectorXd lambda) {
    if (lambda.size() != model.rank()) throw ConfigError("true singular value count mismatch");
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        const double lo = model.lower_ratio(i) * model.lambda_hat(i);
        const double hi = model.upper_ratio(i) * model.lambda_hat(i);
        if (!(lambda(i) >= lo && lambda(i) <= hi)) {
            throw ConfigError("true singular value " + std::to_string(lambda(i)) +
                              " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
    }
    return TrueActuation{std::move(lambda)};
}

Eigen::MatrixXd sigma_hat(const SvdUncertaintyModel& model) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(model.dim_state(), model.dim_action());
    for (int i = 0; i < model.rank(); ++i) s(i, i) = model.lambda_hat(i);
    return s;
}

Eigen::MatrixXd sigma_hat_pinv(const SvdUncertaintyModel& model) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(model.dim_action(), model.dim_state());
    for (int i = 0; i < model.rank(); ++i) {
        if (!(model.lambda_hat(i) > 0.0)) {
            throw ConfigError("singular value estimates must be positive");
        }
        s(i, i) = 1.0 / model.lambda_hat(i);
    }
    return s;
}

Eigen::MatrixXd g_hat_pinv(const SvdUncertaintyModel& model) {
    return model.v_factor * sigma_hat_pinv(model) * model.u_factor.transpose();
}

Eigen::MatrixXd true_g(const SvdUncertaintyModel& model, const TrueActuation& act) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(model.dim_state(), model.dim_action());
    for (int i = 0; i < model.rank(); ++i) s(i, i) = act.lambda_true(i);
    return model.u_factor * s * model.v_factor.transpose();
}

std::pair<SvdUncertaintyModel, TrueActuation> bicycle_svd(double m_mass, double a1, double iz,
                                                          double cf_hidden, double guess_scale,
                                                          double lower_ratio, double upper_ratio) {
    if (!(m_mass > 0.0 && a1 > 0.0 && iz > 0.0 && cf_hidden > 0.0)) {
        throw ConfigError("bicycle parameters must be positive");
    }
    if (!(guess_scale > 0.0)) throw ConfigError("guess_scale must be positive");
    const double l1 = cf_hidden / m_mass;
    const double l2 = cf_hidden * a1 / iz;
    const double l = std::sqrt(l1 * l1 + l2 * l2);
    Eigen::MatrixXd u(2, 2);
    u << l1 / l, l2 / l,
         l2 / l, -l1 / l;
    Eigen::MatrixXd v(1, 1);
    v << 1.0;
    Eigen::VectorXd lam_hat(1), lo(1), hi(1);
    lam_hat << guess_scale * l;
    lo << lower_ratio;
    hi << upper_ratio;
    auto model = SvdUncertaintyModel::make(std::move(u), std::move(v), std::move(lam_hat),
                                           std::move(lo), std::move(hi));
    Eigen::VectorXd lam_true(1);
    lam_true << l;
    auto act = TrueActuation::make(model, std::move(lam_true));
    return {std::move(model), std::move(act)};
}

}  // namespace safectl

#include "safectl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace safectl {

void IntegratorConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("integrator dt must be > 0");
    if (!(horizon >= dt)) throw ConfigError("integrator horizon must be >= dt");
}

double Trajectory::min_phi() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) m = std::min(m, s.phi);
    return m;
}

double Trajectory::safety_rate() const {
    if (samples.empty()) return 1.0;
    std::size_t safe = 0;
    for (const auto& s : samples) {
        if (s.phi >= 0.0) ++safe;
    }
    return static_cast<double>(safe) / static_cast<double>(samples.size());
}

std::optional<double> Trajectory::first_time_phi_at_least(double theta) const {
    for (const auto& s : samples) {
        if (s.phi >= theta) return s.t;
    }
    return std::nullopt;
}

std::size_t Trajectory::count_violations() const {
    std::size_t n = 0;
    for (const auto& s : samples) {
        if (s.phi < 0.0) ++n;
    }
    return n;
}

namespace {

StateVec apply_clip(const AffineSystem& sys, StateVec x) {
    if (sys.state_clip) {
        x = x.cwiseMax(sys.state_clip->first).cwiseMin(sys.state_clip->second);
    }
    return x;
}

}  // namespace

StateVec step(const AffineSystem& sys, const IntegratorConfig& cfg, const StateVec& x,
              const ActionVec& u) {
    const auto rhs = [&](const StateVec& s) -> StateVec {
        return sys.drift(s) + sys.actuation(s) * u;
    };
    StateVec next;
    if (cfg.method == IntegrationMethod::euler) {
        next = x + cfg.dt * rhs(x);
    } else {
        const StateVec k1 = rhs(x);
        const StateVec k2 = rhs(x + 0.5 * cfg.dt * k1);
        const StateVec k3 = rhs(x + 0.5 * cfg.dt * k2);
        const StateVec k4 = rhs(x + cfg.dt * k3);
        next = x + (cfg.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return apply_clip(sys, std::move(next));
}

Trajectory simulate(const AffineSystem& sys, const IntegratorConfig& cfg,
                    const BarrierFunction& barrier, const Controller& controller,
                    const StateVec& x0, const ActionVec& u_init) {
    cfg.validate();
    const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
    Trajectory traj;
    traj.samples.reserve(steps + 1);

    StateVec x = x0;
    StateVec x_prev = x0;
    ActionVec u_last = u_init;
    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * cfg.dt;
        const InformationWindow window(x, x_prev, u_last, cfg.dt);
        ControlDecision decision = controller(t, window);
        traj.samples.push_back({t, x, decision.u, phi_eval(barrier, x), decision.activated});

        StateVec next = step(sys, cfg, x, decision.u);
        if (!next.allFinite()) {
            throw SimulationFault("state became non-finite at t=" + std::to_string(t + cfg.dt),
                                  std::move(traj));
        }
        x_prev = x;
        x = std::move(next);
        u_last = std::move(decision.u);
    }
    const double t_end = static_cast<double>(steps) * cfg.dt;
    traj.samples.push_back({t_end, x, u_last, phi_eval(barrier, x), false});
    return traj;
}

Trajectory simulate(const AffineSystem& sys, const IntegratorConfig& cfg,
                    const BarrierFunction& barrier, const Controller& controller,
                    const StateVec& x0) {
    return simulate(sys, cfg, barrier, controller, x0,
                    ActionVec::Zero(sys.dim_action));
}

Controller state_feedback(std::function<ActionVec(const StateVec&)> law) {
    return [law = std::move(law)](double, const InformationWindow& w) {
        return ControlDecision{law(w.x_now), false};
    };
}

Controller filtered_controller(FilterConfig cfg, SvdUncertaintyModel model,
                               BarrierFunction barrier,
                               std::function<ActionVec(const StateVec&)> nominal,
                               std::shared_ptr<std::vector<CorrectionDiagnostics>> diag_log,
                               std::function<StateVec(const InformationWindow&)> xdot_source) {
    cfg.validate();
    auto fs = std::make_shared<FilterState>();
    auto initialized = std::make_shared<bool>(false);
    return [cfg = std::move(cfg), model = std::move(model), barrier = std::move(barrier),
            nominal = std::move(nominal), diag_log = std::move(diag_log),
            xdot_source = std::move(xdot_source), fs,
            initialized](double t, const InformationWindow& w) {
        if (!*initialized) {
            fs->u_last = nominal(w.x_now);
            fs->x_prev = w.x_now;
            fs->t_prev = t;
            *initialized = true;
        }
        const StateVec xdot = xdot_source ? xdot_source(w) : w.xdot_minus();
        auto [u, diag] = filter_step(cfg, *fs, model, barrier, w.x_now, xdot, nominal(w.x_now));
        fs->t_prev = t;
        if (diag_log) diag_log->push_back(diag);
        return ControlDecision{std::move(u), diag.activated};
    };
}

Linear1dBenchmark linear1d() {
    Linear1dBenchmark b;
    b.sys.dim_state = 1;
    b.sys.dim_action = 1;
    b.sys.drift = [](const StateVec& x) { return StateVec(1.5 * x); };
    b.sys.actuation = [](const StateVec&) { return Eigen::MatrixXd::Identity(1, 1); };
    b.nominal = [](const StateVec& x) { return ActionVec(-x); };
    b.barrier.dim = 1;
    b.barrier.value = [](const StateVec& x) { return 1.0 - 25.0 * x(0) * x(0); };
    b.barrier.gradient = [](const StateVec& x) {
        StateVec g(1);
        g << -50.0 * x(0);
        return g;
    };
    return b;
}

AffineSystem bicycle2d(double m, double a1, double a2, double iz, double u_speed,
                       double cf_hidden, double cr_hidden) {
    if (!(m > 0 && a1 > 0 && a2 > 0 && iz > 0 && u_speed > 0 && cf_hidden > 0 && cr_hidden > 0)) {
        throw ConfigError("bicycle2d parameters must be positive");
    }
    Eigen::Matrix2d a_mat;
    a_mat << -(cr_hidden + cf_hidden) / (m * u_speed),
        (cr_hidden * a2 - cf_hidden * a1) / (m * u_speed) - u_speed,
        (cr_hidden * a2 - cf_hidden * a1) / (u_speed * iz),
        -(cf_hidden * a1 * a1 + cr_hidden * a2 * a2) / (u_speed * iz);
    Eigen::Vector2d g_col(cf_hidden / m, cf_hidden * a1 / iz);

    AffineSystem sys;
    sys.dim_state = 2;
    sys.dim_action = 1;
    sys.drift = [a_mat](const StateVec& x) -> Eigen::VectorXd { return a_mat * x; };
    sys.actuation = [g_col](const StateVec&) -> Eigen::MatrixXd { return g_col; };
    return sys;
}

namespace {

// sin(psi)/psi with the removable singularity handled by series for small psi.
double sinc_psi(double psi) {
    if (std::abs(psi) < 1e-4) {
        const double p2 = psi * psi;
        return 1.0 - p2 / 6.0 + p2 * p2 / 120.0;
    }
    return std::sin(psi) / psi;
}

}  // namespace

Vehicle4dBenchmark vehicle4d(double m, double iz, double a, double c_alpha_f, double c0,
                             double c1, double c2, double v_speed, double lambda_lower_ratio,
                             double lambda_upper_ratio) {
    const double vx = v_speed;  // forward speed held constant alongside the net speed

    AffineSystem sys;
    sys.dim_state = 4;
    sys.dim_action = 1;
    sys.drift = [m, iz, c0, c1, c2, v_speed, vx](const StateVec& x) {
        const double vy = x(0), r = x(1), psi = x(2);
        Eigen::VectorXd d(4);
        d(0) = (-c0 / (m * v_speed)) * vy + (-c1 / (m * v_speed) - v_speed) * r;
        d(1) = (-c1 / (iz * v_speed)) * vy + (-c2 / (iz * v_speed)) * r;
        d(2) = r;
        d(3) = std::cos(psi) * vy + vx * sinc_psi(psi) * psi;
        return d;
    };
    Eigen::Vector4d g_col(c_alpha_f / m, a * c_alpha_f / iz, 0.0, 0.0);
    sys.actuation = [g_col](const StateVec&) -> Eigen::MatrixXd { return g_col; };
    Eigen::Vector4d lo(-7.0, -350.0, -std::numeric_limits<double>::infinity(),
                       -std::numeric_limits<double>::infinity());
    Eigen::Vector4d hi(7.0, 350.0, std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity());
    sys.state_clip = {lo, hi};

    BarrierFunction barrier;
    barrier.dim = 4;
    const double r_ref = 50.0 * M_PI;
    barrier.value = [r_ref](const StateVec& x) {
        const double vy = x(0), r = x(1);
        return 200.0 - 4.0 * (r - r_ref) * (r - r_ref) - 0.001 * (vy - 2.5) * (vy - 2.5);
    };
    barrier.gradient = [r_ref](const StateVec& x) {
        StateVec g = StateVec::Zero(4);
        g(0) = -0.002 * (x(0) - 2.5);
        g(1) = -8.0 * (x(1) - r_ref);
        return g;
    };

    const double psi_ref = M_PI / 2.0;
    const double psi_band = M_PI / 36.0;
    auto reward = [psi_ref, psi_band](const StateVec& s, const StateVec& s_next) {
        if (std::abs(s_next(2) - psi_ref) < psi_band) return std::make_pair(7000.0, true);
        const double d = s(2) - psi_ref;
        return std::make_pair(-4.0 + 0.25 / (d * d + 0.0001), false);
    };
    auto cost = [r_ref](const StateVec& s_next) {
        const double dr = s_next(1) - r_ref;
        const double dv = s_next(0) - 2.5;
        return std::min(0.004 * dr * dr + 1e-6 * dv * dv, 0.1);
    };

    // The printed decomposition has a non-orthonormal V = [c_alpha_f]; the
    // equivalent orthonormal form moves that factor into the singular value.
    const double s = std::sqrt(1.0 / (m * m) + (a * a) / (iz * iz));
    Eigen::Matrix4d u_mat = Eigen::Matrix4d::Identity();
    u_mat(0, 0) = (1.0 / m) / s;
    u_mat(0, 1) = -(a / iz) / s;
    u_mat(1, 0) = (a / iz) / s;
    u_mat(1, 1) = (1.0 / m) / s;
    Eigen::MatrixXd v_mat = Eigen::MatrixXd::Identity(1, 1);
    const double lambda_true = s * c_alpha_f;
    Eigen::VectorXd lam_hat(1), lo_ratio(1), hi_ratio(1);
    lam_hat << lambda_true;
    lo_ratio << lambda_lower_ratio;
    hi_ratio << lambda_upper_ratio;
    auto model = SvdUncertaintyModel::make(u_mat, v_mat, lam_hat, lo_ratio, hi_ratio);
    Eigen::VectorXd lam(1);
    lam << lambda_true;
    auto act = TrueActuation::make(model, lam);

    return Vehicle4dBenchmark{std::move(sys), std::move(barrier), std::move(reward),
                              std::move(cost), std::move(model), std::move(act)};
}

AffineSystem system_from_svd(std::function<Eigen::VectorXd(const StateVec&)> drift,
                             const SvdUncertaintyModel& model, const TrueActuation& act) {
    AffineSystem sys;
    sys.dim_state = model.dim_state();
    sys.dim_action = model.dim_action();
    sys.drift = std::move(drift);
    Eigen::MatrixXd g = true_g(model, act);
    sys.actuation = [g = std::move(g)](const StateVec&) { return g; };
    return sys;
}

}  // namespace safectl

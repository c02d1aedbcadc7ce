#include "safectl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace safectl::baselines {

namespace {

void advance_theta_hat(double& theta_hat, double gamma_rate, double x, double dt) {
    theta_hat += dt * gamma_rate * 50.0 * x * x;
}

}  // namespace

double acbf_control(AcbfState& s, double x, double u_nom, double dt) {
    double u = u_nom;
    if (x > 0.0) {
        u = std::min(u_nom, -(1.0 + s.theta_hat) * x);
    } else if (x < 0.0) {
        u = std::max(u_nom, -(1.0 + s.theta_hat) * x);
    }
    advance_theta_hat(s.theta_hat, s.gamma_rate, x, dt);
    return u;
}

double racbf_control(RacbfState& s, double x, double u_nom, double phi_a, double dt) {
    double u = u_nom;
    if (x != 0.0) {
        const double bound = (phi_a - s.tightening()) / (50.0 * x) - (1.0 + s.theta_hat) * x;
        u = (x > 0.0) ? std::min(u_nom, bound) : std::max(u_nom, bound);
    }
    advance_theta_hat(s.theta_hat, s.gamma_rate, x, dt);
    return u;
}

void smid_update(RacbfState& s, const std::vector<SmidSample>& samples) {
    double lo = s.r_min;
    double hi = s.r_max;
    bool inconsistent = false;
    for (const auto& sample : samples) {
        const double residual = sample.xdot - sample.x - sample.u;
        if (sample.x == 0.0) {
            if (std::abs(residual) > s.d_bound) inconsistent = true;
            continue;
        }
        double a = (residual - s.d_bound) / sample.x;
        double b = (residual + s.d_bound) / sample.x;
        if (a > b) std::swap(a, b);
        lo = std::max(lo, a);
        hi = std::min(hi, b);
    }
    if (inconsistent || lo > hi) {
        s.smid_inconsistent = true;
        return;
    }
    s.r_min = lo;
    s.r_max = hi;
    s.nu_tilde = std::max(std::abs(s.r_min - s.theta_hat), std::abs(s.r_max - s.theta_hat));
}

namespace {

constexpr double kFeasTol = 1e-12;

bool satisfies_all(const std::vector<Eigen::Vector3d>& constraints, const Eigen::Vector2d& p,
                   double tol) {
    for (const auto& c : constraints) {
        if (c(0) * p(0) + c(1) * p(1) > c(2) + tol) return false;
    }
    return true;
}

// Clip a convex polygon by the half-plane a*x + b*y <= c (Sutherland-Hodgman).
std::vector<Eigen::Vector2d> clip_polygon(const std::vector<Eigen::Vector2d>& poly,
                                          const Eigen::Vector3d& hp) {
    std::vector<Eigen::Vector2d> out;
    const auto n = poly.size();
    if (n == 0) return out;
    auto value = [&](const Eigen::Vector2d& v) { return hp(0) * v(0) + hp(1) * v(1) - hp(2); };
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d& a = poly[i];
        const Eigen::Vector2d& b = poly[(i + 1) % n];
        const double va = value(a);
        const double vb = value(b);
        if (va <= 0.0) out.push_back(a);
        if ((va < 0.0 && vb > 0.0) || (va > 0.0 && vb < 0.0)) {
            const double t = va / (va - vb);
            out.push_back(a + t * (b - a));
        }
    }
    return out;
}

Eigen::Vector2d closest_point_on_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                                         const Eigen::Vector2d& p) {
    const Eigen::Vector2d d = b - a;
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) return a;
    const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    return a + t * d;
}

}  // namespace

Eigen::Vector2d project_onto_polygon(const std::vector<Eigen::Vector2d>& polygon,
                                     const Eigen::Vector2d& point) {
    if (polygon.empty()) return point;
    if (polygon.size() == 1) return polygon.front();
    if (polygon.size() >= 3) {
        // CCW vertex order is preserved by the clipper; interior points
        // project to themselves.
        bool inside = true;
        for (std::size_t i = 0; i < polygon.size() && inside; ++i) {
            const Eigen::Vector2d& a = polygon[i];
            const Eigen::Vector2d& b = polygon[(i + 1) % polygon.size()];
            const Eigen::Vector2d e = b - a;
            const double cross = e(0) * (point(1) - a(1)) - e(1) * (point(0) - a(0));
            if (cross < -1e-15 * (1.0 + e.norm() + point.norm())) inside = false;
        }
        if (inside) return point;
    }
    Eigen::Vector2d best = polygon.front();
    double best_d2 = (best - point).squaredNorm();
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const Eigen::Vector2d q = closest_point_on_segment(
            polygon[i], polygon[(i + 1) % polygon.size()], point);
        const double d2 = (q - point).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = q;
        }
    }
    return best;
}

CbcState make_cbc(double alpha_box, double beta_min, double beta_max, double eta_slack) {
    if (!(alpha_box > 0.0) || !(beta_min > 0.0) || !(beta_max > beta_min)) {
        throw ConfigError("cbc parameter box is invalid");
    }
    CbcState s;
    s.eta_slack = eta_slack;
    s.polygon = {{-alpha_box, beta_min},
                 {alpha_box, beta_min},
                 {alpha_box, beta_max},
                 {-alpha_box, beta_max}};
    s.constraints = {{1.0, 0.0, alpha_box},
                     {-1.0, 0.0, alpha_box},
                     {0.0, 1.0, beta_max},
                     {0.0, -1.0, -beta_min}};
    s.candidate = {0.0, 0.5 * (beta_min + beta_max)};
    return s;
}

namespace {

// The clipped polygon's vertices carry accumulated interpolation error, so a
// point projected onto it can sit ~1e-9 outside a raw half-plane. Re-derive
// the projection exactly from the raw constraints active near the polygon
// answer (two variables: a hyperplane foot or a pairwise vertex).
Eigen::Vector2d polish_projection(const std::vector<Eigen::Vector3d>& constraints,
                                  const Eigen::Vector2d& original, Eigen::Vector2d rough) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        const auto& c = constraints[i];
        const double scale = 1.0 + std::abs(c(2)) + std::hypot(c(0), c(1));
        if (c(0) * rough(0) + c(1) * rough(1) - c(2) > -1e-6 * scale) active.push_back(i);
    }
    auto feasible = [&](const Eigen::Vector2d& p) {
        for (const auto& c : constraints) {
            const double scale = 1.0 + std::abs(c(2)) + std::hypot(c(0), c(1));
            if (c(0) * p(0) + c(1) * p(1) - c(2) > 1e-12 * scale) return false;
        }
        return true;
    };

    Eigen::Vector2d best = rough;
    double best_d2 = std::numeric_limits<double>::infinity();
    auto consider = [&](const Eigen::Vector2d& p) {
        if (!feasible(p)) return;
        const double d2 = (p - original).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = p;
        }
    };
    for (const std::size_t i : active) {
        const auto& c = constraints[i];
        const Eigen::Vector2d n(c(0), c(1));
        const double n2 = n.squaredNorm();
        if (n2 == 0.0) continue;
        consider(original - n * ((n.dot(original) - c(2)) / n2));
    }
    for (std::size_t a = 0; a < active.size(); ++a) {
        for (std::size_t b = a + 1; b < active.size(); ++b) {
            const auto& ca = constraints[active[a]];
            const auto& cb = constraints[active[b]];
            const double det = ca(0) * cb(1) - ca(1) * cb(0);
            if (std::abs(det) < 1e-14) continue;
            consider({(ca(2) * cb(1) - ca(1) * cb(2)) / det,
                      (ca(0) * cb(2) - ca(2) * cb(0)) / det});
        }
    }
    return best;
}

}  // namespace

void cbc_observe(CbcState& s, double x_i, double u_i, double x_next) {
    const Eigen::Vector3d upper(x_i, u_i, x_next + s.eta_slack);
    const Eigen::Vector3d lower(-x_i, -u_i, s.eta_slack - x_next);
    auto clipped = clip_polygon(s.polygon, upper);
    clipped = clip_polygon(clipped, lower);
    if (clipped.empty()) {
        // Numerically inconsistent sample; keep the previous body.
        s.empty_clip_warned = true;
        return;
    }
    s.polygon = std::move(clipped);
    s.constraints.push_back(upper);
    s.constraints.push_back(lower);
    if (!satisfies_all(s.constraints, s.candidate, kFeasTol)) {
        const Eigen::Vector2d rough = project_onto_polygon(s.polygon, s.candidate);
        s.candidate = polish_projection(s.constraints, s.candidate, rough);
    }
}

double cbc_control(const CbcState& s, double x) {
    if (!(s.candidate(1) > 0.0)) throw FilterError("cbc candidate beta must stay positive");
    return -(s.candidate(0) / s.candidate(1)) * x;
}

const char* baseline_name(BaselineKind k) {
    switch (k) {
        case BaselineKind::acbf: return "acbf";
        case BaselineKind::racbf: return "racbf";
        case BaselineKind::racbfs: return "racbfs";
        case BaselineKind::cbc: return "cbc";
    }
    return "?";
}

BaselineKind baseline_from_name(const std::string& name) {
    if (name == "acbf") return BaselineKind::acbf;
    if (name == "racbf") return BaselineKind::racbf;
    if (name == "racbfs") return BaselineKind::racbfs;
    if (name == "cbc") return BaselineKind::cbc;
    throw ConfigError("unknown baseline '" + name + "'");
}

Controller make_baseline_controller(BaselineKind kind, double dt, const BaselineParams& params) {
    const auto phi_a = [](double x) { return 1.0 - 25.0 * x * x; };
    switch (kind) {
        case BaselineKind::acbf: {
            auto s = std::make_shared<AcbfState>();
            s->gamma_rate = params.gamma_rate;
            return [s, dt](double, const InformationWindow& w) {
                const double x = w.x_now(0);
                const double u_nom = -x;
                const double u = acbf_control(*s, x, u_nom, dt);
                ActionVec a(1);
                a << u;
                return ControlDecision{std::move(a), u != u_nom};
            };
        }
        case BaselineKind::racbf:
        case BaselineKind::racbfs: {
            auto s = std::make_shared<RacbfState>();
            s->gamma_rate = params.gamma_rate;
            s->nu_tilde = params.nu_tilde0;
            s->d_bound = params.d_bound;
            s->r_min = s->theta_hat - params.nu_tilde0;
            s->r_max = s->theta_hat + params.nu_tilde0;
            auto pending = std::make_shared<std::vector<SmidSample>>();
            const bool smid = (kind == BaselineKind::racbfs);
            const double smid_period = params.smid_period;
            auto next_update = std::make_shared<double>(smid_period);
            return [s, pending, smid, next_update, smid_period, dt,
                    phi_a](double t, const InformationWindow& w) {
                const double x = w.x_now(0);
                if (smid && t > 0.0) {
                    pending->push_back(
                        {w.x_prev(0), w.u_last(0), (w.x_now(0) - w.x_prev(0)) / w.delta});
                    if (t + 0.5 * dt >= *next_update) {
                        smid_update(*s, *pending);
                        pending->clear();
                        *next_update += smid_period;
                    }
                }
                const double u_nom = -x;
                const double u = racbf_control(*s, x, u_nom, phi_a(x), dt);
                ActionVec a(1);
                a << u;
                return ControlDecision{std::move(a), u != u_nom};
            };
        }
        case BaselineKind::cbc: {
            auto s = std::make_shared<CbcState>(make_cbc(
                params.cbc_alpha_box, params.cbc_beta_min, params.cbc_beta_max, params.cbc_eta));
            return [s](double t, const InformationWindow& w) {
                if (t > 0.0) cbc_observe(*s, w.x_prev(0), w.u_last(0), w.x_now(0));
                ActionVec a(1);
                a << cbc_control(*s, w.x_now(0));
                return ControlDecision{std::move(a), false};
            };
        }
    }
    throw ConfigError("unknown baseline kind");
}

}  // namespace safectl::baselines

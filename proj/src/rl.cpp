#include "safectl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace safectl::rl {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

struct Layout {
    int in, hidden, out;
    int w1_off, b1_off, w2_off, b2_off, w3_off, b3_off, total;

    Layout(int in_, int hidden_, int out_) : in(in_), hidden(hidden_), out(out_) {
        w1_off = 0;
        b1_off = w1_off + hidden * in;
        w2_off = b1_off + hidden;
        b2_off = w2_off + hidden * hidden;
        w3_off = b2_off + hidden;
        b3_off = w3_off + out * hidden;
        total = b3_off + out;
    }
};

using ConstMat = Eigen::Map<const Eigen::MatrixXd>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;
using MutMat = Eigen::Map<Eigen::MatrixXd>;
using MutVec = Eigen::Map<Eigen::VectorXd>;

}  // namespace

GaussianPolicy::GaussianPolicy(int in_dim, int hidden, int out_dim, double sigma, uint64_t seed)
    : in_dim_(in_dim), hidden_(hidden), out_dim_(out_dim), sigma_(sigma) {
    if (in_dim <= 0 || hidden <= 0 || out_dim <= 0) throw ConfigError("policy dimensions must be positive");
    if (!(sigma > 0.0)) throw ConfigError("policy sigma must be positive");
    const Layout lay(in_dim_, hidden_, out_dim_);
    w_.resize(lay.total);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](MutVec block, int fan_in) {
        std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(double(fan_in)),
                                                    1.0 / std::sqrt(double(fan_in)));
        for (Eigen::Index i = 0; i < block.size(); ++i) block(i) = dist(rng);
    };
    fill(MutVec(w_.data() + lay.w1_off, hidden_ * in_dim_), in_dim_);
    MutVec(w_.data() + lay.b1_off, hidden_).setZero();
    fill(MutVec(w_.data() + lay.w2_off, hidden_ * hidden_), hidden_);
    MutVec(w_.data() + lay.b2_off, hidden_).setZero();
    fill(MutVec(w_.data() + lay.w3_off, out_dim_ * hidden_), hidden_);
    MutVec(w_.data() + lay.b3_off, out_dim_).setZero();
}

GaussianPolicy::Forward GaussianPolicy::forward(const StateVec& s) const {
    if (s.size() != in_dim_) throw ConfigError("policy input dimension mismatch");
    const Layout lay(in_dim_, hidden_, out_dim_);
    ConstMat w1(w_.data() + lay.w1_off, hidden_, in_dim_);
    ConstVec b1(w_.data() + lay.b1_off, hidden_);
    ConstMat w2(w_.data() + lay.w2_off, hidden_, hidden_);
    ConstVec b2(w_.data() + lay.b2_off, hidden_);
    ConstMat w3(w_.data() + lay.w3_off, out_dim_, hidden_);
    ConstVec b3(w_.data() + lay.b3_off, out_dim_);

    Forward f;
    f.h1 = ((w1 * s + b1).array().tanh()).matrix();
    f.h2 = ((w2 * f.h1 + b2).array().tanh()).matrix();
    f.mu = w3 * f.h2 + b3;
    return f;
}

Eigen::VectorXd GaussianPolicy::mean(const StateVec& s) const { return forward(s).mu; }

double GaussianPolicy::log_density(const StateVec& s, const ActionVec& a) const {
    const Eigen::VectorXd mu = mean(s);
    const double quad = (a - mu).squaredNorm() / (2.0 * sigma_ * sigma_);
    return -0.5 * out_dim_ * std::log(kTwoPi * sigma_ * sigma_) - quad;
}

Eigen::VectorXd GaussianPolicy::logp_gradient(const StateVec& s, const ActionVec& a) const {
    const Layout lay(in_dim_, hidden_, out_dim_);
    const Forward f = forward(s);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(lay.total);
    MutMat gw1(grad.data() + lay.w1_off, hidden_, in_dim_);
    MutVec gb1(grad.data() + lay.b1_off, hidden_);
    MutMat gw2(grad.data() + lay.w2_off, hidden_, hidden_);
    MutVec gb2(grad.data() + lay.b2_off, hidden_);
    MutMat gw3(grad.data() + lay.w3_off, out_dim_, hidden_);
    MutVec gb3(grad.data() + lay.b3_off, out_dim_);
    ConstMat w2(w_.data() + lay.w2_off, hidden_, hidden_);
    ConstMat w3(w_.data() + lay.w3_off, out_dim_, hidden_);

    const Eigen::VectorXd d3 = (a - f.mu) / (sigma_ * sigma_);
    gw3 = d3 * f.h2.transpose();
    gb3 = d3;
    const Eigen::VectorXd d2 =
        (w3.transpose() * d3).cwiseProduct((1.0 - f.h2.array().square()).matrix());
    gw2 = d2 * f.h1.transpose();
    gb2 = d2;
    const Eigen::VectorXd d1 =
        (w2.transpose() * d2).cwiseProduct((1.0 - f.h1.array().square()).matrix());
    gw1 = d1 * s.transpose();
    gb1 = d1;
    return grad;
}

GaussianPolicy::Sample GaussianPolicy::sample_with_noise(const StateVec& s,
                                                         const Eigen::VectorXd& z,
                                                         std::optional<double> clip) const {
    ActionVec a = mean(s) + sigma_ * z;
    if (clip) a = a.cwiseMax(-*clip).cwiseMin(*clip);
    Sample out;
    out.logp = log_density(s, a);
    out.logp_grad = logp_gradient(s, a);
    out.a = std::move(a);
    return out;
}

GaussianPolicy::Sample GaussianPolicy::sample(const StateVec& s, std::mt19937_64& rng,
                                              std::optional<double> clip) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(out_dim_);
    for (int i = 0; i < out_dim_; ++i) z(i) = normal(rng);
    return sample_with_noise(s, z, clip);
}

ActionVec shield(const StateVec& s, const StateVec& sdot_minus, const ActionVec& a,
                 const ActionVec& u_last, const FilterConfig& cfg,
                 const SvdUncertaintyModel& model, const BarrierFunction& barrier) {
    if (phi_eval(barrier, s) > cfg.theta) return a;
    return correction_step(cfg, u_last, model, barrier, s, sdot_minus).first;
}

void TrainConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in [0, 1)");
    if (episodes <= 0) throw ConfigError("episodes must be positive");
    if (!(ts > 0.0)) throw ConfigError("ts must be positive");
    if (max_steps <= 0) throw ConfigError("max_steps must be positive");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
}

Environment make_environment(const Vehicle4dBenchmark& bench) {
    Environment env;
    env.sys = bench.sys;
    env.barrier = bench.barrier;
    env.reward = bench.reward;
    env.cost = bench.cost;
    env.model = bench.model;
    env.x0 = StateVec::Zero(4);
    return env;
}

Rollout rollout(const Environment& env, const GaussianPolicy& policy, const TrainConfig& cfg,
                std::mt19937_64& rng) {
    FilterConfig shield_cfg;
    shield_cfg.theta = cfg.trigger_theta;
    shield_cfg.eta = cfg.eta;
    shield_cfg.slack = cfg.slack;
    shield_cfg.xdot_tol = cfg.xdot_tol;
    shield_cfg.clip_low = -cfg.control_clip;
    shield_cfg.clip_high = cfg.control_clip;

    IntegratorConfig euler{cfg.ts, IntegrationMethod::euler, cfg.ts};

    Rollout out;
    out.min_phi = std::numeric_limits<double>::infinity();
    StateVec s = env.x0;
    StateVec s_prev = s;
    ActionVec u_last = ActionVec::Zero(env.sys.dim_action);
    bool entered_safe_set = false;
    for (int n = 0; n < cfg.max_steps; ++n) {
        const StateVec sdot = (s - s_prev) / cfg.ts;
        auto sampled = policy.sample(s, rng, cfg.action_clip);
        ActionVec u = cfg.shield_on
                          ? shield(s, sdot, sampled.a, u_last, shield_cfg, env.model, env.barrier)
                          : sampled.a;
        const bool active = cfg.shield_on && (u != sampled.a);

        StateVec s_next = step(env.sys, euler, s, u);
        const double phi = phi_eval(env.barrier, s);
        out.min_phi = std::min(out.min_phi, phi);
        if (phi < 0.0) {
            ++out.violations;
            if (entered_safe_set) ++out.violations_after_entry;
        } else {
            entered_safe_set = true;
        }

        if (!s_next.allFinite()) {
            out.aborted = true;
            break;
        }
        auto [r, terminal] = env.reward(s, s_next);
        const double c = env.cost(s_next);
        out.cost_sum += c;
        out.return_ += std::pow(cfg.gamma, n) * r;
        out.steps.push_back({s, sampled.a, u, r, std::move(sampled.logp_grad), phi, c, active});

        s_prev = s;
        s = std::move(s_next);
        u_last = std::move(u);
        if (terminal) {
            out.succeeded = true;
            break;
        }
    }
    return out;
}

Eigen::VectorXd estimate_gradient(const Rollout& r) {
    if (r.steps.empty()) return Eigen::VectorXd();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(r.steps.front().logp_grad.size());
    for (const auto& st : r.steps) sum += st.logp_grad;
    return sum * r.return_;
}

void sgd_update(Eigen::VectorXd& w, const Eigen::VectorXd& grad, double alpha_e) {
    if (grad.size() == 0) return;
    if (grad.size() != w.size()) throw ConfigError("gradient/parameter size mismatch");
    w += alpha_e * grad;
}

TrainResult train(const Environment& env, GaussianPolicy& policy, const TrainConfig& cfg) {
    cfg.validate();
    TrainResult result;
    result.initial_phi = phi_eval(env.barrier, env.x0);
    std::mt19937_64 rng(cfg.seed);
    double return_mean = 0.0;
    for (int e = 0; e < cfg.episodes; ++e) {
        Rollout ro = rollout(env, policy, cfg, rng);
        Eigen::VectorXd grad;
        if (cfg.subtract_return_mean && e > 0) {
            // Variance-reduction extension: score times (R - mean of previous
            // returns); the baseline is independent of this episode's actions.
            if (!ro.steps.empty()) {
                Eigen::VectorXd sum = Eigen::VectorXd::Zero(policy.param_count());
                for (const auto& st : ro.steps) sum += st.logp_grad;
                grad = sum * (ro.return_ - return_mean);
            }
        } else {
            grad = estimate_gradient(ro);
        }
        sgd_update(policy.weights(), grad, cfg.step_size);
        return_mean += (ro.return_ - return_mean) / static_cast<double>(e + 1);

        result.rows.push_back({e, static_cast<int>(ro.steps.size()), ro.return_, ro.succeeded,
                               ro.violations, ro.min_phi, ro.cost_sum,
                               ro.violations_after_entry});
        result.total_samples += ro.steps.size();
        result.total_violations += ro.violations;
        result.total_violations_after_entry += ro.violations_after_entry;
    }
    return result;
}

// --- Tabular oracle ----------------------------------------------------------

TabularMdp default_oracle_mdp(bool identity_shield) {
    TabularMdp mdp;
    mdp.reward = {{{1.0, -0.5}, {0.25, 2.0}}};
    mdp.transition = {{{{{0.9, 0.1}, {0.3, 0.7}}}, {{{0.6, 0.4}, {0.2, 0.8}}}}};
    if (identity_shield) {
        mdp.shield_map = [](int, int a) { return a; };
    } else {
        // In state 1 every sampled action is overridden to action 0.
        mdp.shield_map = [](int s, int a) { return s == 1 ? 0 : a; };
    }
    return mdp;
}

double TabularPolicy::prob(int s, int a) const {
    const double l0 = logits(s, 0) / temperature;
    const double l1 = logits(s, 1) / temperature;
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m);
    const double e1 = std::exp(l1 - m);
    return (a == 0 ? e0 : e1) / (e0 + e1);
}

Eigen::Vector4d TabularPolicy::logp_grad(int s, int a) const {
    Eigen::Vector4d g = Eigen::Vector4d::Zero();
    for (int ap = 0; ap < 2; ++ap) {
        g(s * 2 + ap) = ((ap == a ? 1.0 : 0.0) - prob(s, ap)) / temperature;
    }
    return g;
}

namespace {

// Enumerates every (a_0, s_1, a_1, ..., a_{H-1}) path; calls visit(prob,
// discounted_return, score_sum) at the leaves.
template <typename Visit>
void enumerate_paths(const TabularMdp& mdp, const TabularPolicy& policy, Visit&& visit) {
    struct Frame {
        int s;
        double prob;
        double ret;
        Eigen::Vector4d score;
    };
    std::function<void(int, Frame)> recurse = [&](int n, Frame f) {
        if (n == mdp.horizon) {
            visit(f.prob, f.ret, f.score);
            return;
        }
        for (int a = 0; a < mdp.n_actions; ++a) {
            const int u = mdp.shield_map(f.s, a);
            Frame g = f;
            g.prob *= policy.prob(f.s, a);
            g.ret += std::pow(mdp.gamma, n) * mdp.reward[f.s][u];
            g.score += policy.logp_grad(f.s, a);
            if (n + 1 == mdp.horizon) {
                // No further action depends on the final transition; the
                // next-state marginal sums out.
                recurse(n + 1, g);
            } else {
                for (int sn = 0; sn < mdp.n_states; ++sn) {
                    Frame h = g;
                    h.prob *= mdp.transition[f.s][u][sn];
                    h.s = sn;
                    recurse(n + 1, h);
                }
            }
        }
    };
    recurse(0, Frame{mdp.s0, 1.0, 0.0, Eigen::Vector4d::Zero()});
}

}  // namespace

double exact_objective(const TabularMdp& mdp, const TabularPolicy& policy) {
    double j = 0.0;
    enumerate_paths(mdp, policy,
                    [&](double p, double r, const Eigen::Vector4d&) { j += p * r; });
    return j;
}

Eigen::Vector4d exact_policy_gradient(const TabularMdp& mdp, const TabularPolicy& policy) {
    Eigen::Vector4d g = Eigen::Vector4d::Zero();
    enumerate_paths(mdp, policy, [&](double p, double r, const Eigen::Vector4d& score) {
        g += p * r * score;
    });
    return g;
}

UnbiasednessReport unbiasedness_check(const TabularMdp& mdp, const TabularPolicy& policy,
                                      int n_samples, uint64_t seed) {
    if (n_samples < 2) throw ConfigError("unbiasedness check needs at least 2 samples");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Eigen::Vector4d sum = Eigen::Vector4d::Zero();
    Eigen::Vector4d sumsq = Eigen::Vector4d::Zero();
    for (int i = 0; i < n_samples; ++i) {
        int s = mdp.s0;
        double ret = 0.0;
        Eigen::Vector4d score = Eigen::Vector4d::Zero();
        for (int n = 0; n < mdp.horizon; ++n) {
            const int a = (unif(rng) < policy.prob(s, 0)) ? 0 : 1;
            const int u = mdp.shield_map(s, a);
            score += policy.logp_grad(s, a);
            ret += std::pow(mdp.gamma, n) * mdp.reward[s][u];
            const double roll = unif(rng);
            s = (roll < mdp.transition[s][u][0]) ? 0 : 1;
        }
        const Eigen::Vector4d est = score * ret;
        sum += est;
        sumsq += est.cwiseProduct(est);
    }

    UnbiasednessReport rep;
    rep.n_samples = n_samples;
    rep.exact_grad = exact_policy_gradient(mdp, policy);
    rep.mc_mean = sum / n_samples;
    const Eigen::Vector4d var =
        (sumsq - n_samples * rep.mc_mean.cwiseProduct(rep.mc_mean)) / (n_samples - 1.0);
    rep.mc_std = var.cwiseMax(0.0).cwiseSqrt();
    for (int i = 0; i < 4; ++i) {
        const double se = rep.mc_std(i) / std::sqrt(double(n_samples));
        const double diff = rep.mc_mean(i) - rep.exact_grad(i);
        rep.z_scores(i) = (se > 0.0) ? diff / se : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    }
    rep.max_abs_z = rep.z_scores.cwiseAbs().maxCoeff();
    rep.estimator_variance = var.mean();
    return rep;
}

}  // namespace safectl::rl

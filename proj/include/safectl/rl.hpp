#pragma once

#include "safectl/core.hpp"
#include "safectl/dynamics.hpp"
#include "safectl/filter.hpp"
#include "safectl/uncertainty.hpp"

#include <array>
#include <optional>
#include <random>
#include <vector>

namespace safectl::rl {

/// Gaussian policy: a two-hidden-layer tanh network predicts the action mean;
/// the action is mean + sigma * z with fixed standard deviation. Parameters
/// live in one flat vector so the whole gradient is a plain vector too.
class GaussianPolicy {
public:
    GaussianPolicy(int in_dim, int hidden, int out_dim, double sigma, uint64_t seed);

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }
    double sigma() const { return sigma_; }
    int param_count() const { return static_cast<int>(w_.size()); }

    const Eigen::VectorXd& weights() const { return w_; }
    Eigen::VectorXd& weights() { return w_; }

    Eigen::VectorXd mean(const StateVec& s) const;

    double log_density(const StateVec& s, const ActionVec& a) const;

    /// d/dw of ln pi_w(a|s), by reverse-mode accumulation through the network.
    Eigen::VectorXd logp_gradient(const StateVec& s, const ActionVec& a) const;

    struct Sample {
        ActionVec a;
        Eigen::VectorXd logp_grad;
        double logp;
    };

    /// a = mean(s) + sigma * z, optionally box-clipped, with the log-density
    /// gradient taken at the returned (executable) action.
    Sample sample_with_noise(const StateVec& s, const Eigen::VectorXd& z,
                             std::optional<double> clip) const;
    Sample sample(const StateVec& s, std::mt19937_64& rng, std::optional<double> clip) const;

private:
    int in_dim_, hidden_, out_dim_;
    double sigma_;
    Eigen::VectorXd w_;

    struct Forward {
        Eigen::VectorXd h1, h2, mu;  // post-activation hidden layers and output
    };
    Forward forward(const StateVec& s) const;
};

/// Eq.-style shield: pass the sampled action through while phi(s) is above
/// the trigger threshold (cfg.theta), otherwise substitute the correction
/// u_last - g_hat^+ y. A deterministic function of (s, sdot_minus, a, u_last).
ActionVec shield(const StateVec& s, const StateVec& sdot_minus, const ActionVec& a,
                 const ActionVec& u_last, const FilterConfig& cfg,
                 const SvdUncertaintyModel& model, const BarrierFunction& barrier);

struct RolloutStep {
    StateVec s;
    ActionVec a;  // sampled
    ActionVec u;  // played
    double r = 0.0;
    Eigen::VectorXd logp_grad;
    double phi = 0.0;
    double cost = 0.0;
    bool shield_active = false;
};

struct Rollout {
    std::vector<RolloutStep> steps;
    double return_ = 0.0;  // sum of gamma^n r_n
    bool succeeded = false;
    bool aborted = false;  // dynamics went non-finite mid-episode
    std::size_t violations = 0;  // samples with phi < 0
    double min_phi = 0.0;
    double cost_sum = 0.0;
    /// Count of phi < 0 samples occurring after the first phi >= 0 sample
    /// (zero when the safe set is never entered).
    std::size_t violations_after_entry = 0;
};

struct TrainConfig {
    double gamma = 0.99;
    int episodes = 500;
    double step_size = 1e-5;  // constant alpha_e; the source text never fixes it
    uint64_t seed = 0;
    double ts = 0.02;
    int max_steps = 1000;
    int hidden = 100;
    double sigma = 0.7;
    bool shield_on = true;
    double trigger_theta = 500.0;
    double eta = 500.0;
    double slack = 1e-3;
    double xdot_tol = 1e-9;
    double action_clip = 100.0;   // applied to the sampled action before the shield
    double control_clip = 100.0;  // applied to the shield's correction output
    bool subtract_return_mean = false;  // optional variance-reduction extension

    void validate() const;
};

/// Environment adapter for episodic training: the plant stepped with Euler at
/// ts (first-order hold), the barrier, and the reward/cost shaping.
struct Environment {
    AffineSystem sys;
    BarrierFunction barrier;
    std::function<std::pair<double, bool>(const StateVec&, const StateVec&)> reward;
    std::function<double(const StateVec&)> cost;
    SvdUncertaintyModel model;
    StateVec x0;
};

Environment make_environment(const Vehicle4dBenchmark& bench);

/// One episode under the (optionally shielded) policy. The discrete transition
/// is s_{n+1} = s_n + ts * xdot, matching the stated first-order hold.
Rollout rollout(const Environment& env, const GaussianPolicy& policy, const TrainConfig& cfg,
                std::mt19937_64& rng);

/// Eq.-style REINFORCE estimate: (sum of per-step log-density gradients)
/// scaled by the episode return stored in the rollout.
Eigen::VectorXd estimate_gradient(const Rollout& r);

/// w <- w + alpha_e * grad.
void sgd_update(Eigen::VectorXd& w, const Eigen::VectorXd& grad, double alpha_e);

struct EpisodeRow {
    int episode;
    int steps;
    double return_;
    bool success;
    std::size_t violations;
    double min_phi;
    double cost_sum;
    std::size_t violations_after_entry;
};

struct TrainResult {
    std::vector<EpisodeRow> rows;
    std::size_t total_samples = 0;
    std::size_t total_violations = 0;
    std::size_t total_violations_after_entry = 0;
    double initial_phi = 0.0;  // phi(x0), surfaced because it is startlingly negative

    double violation_fraction() const {
        return total_samples == 0 ? 0.0
                                  : static_cast<double>(total_violations) /
                                        static_cast<double>(total_samples);
    }
};

TrainResult train(const Environment& env, GaussianPolicy& policy, const TrainConfig& cfg);

// --- Tabular oracle for the unbiasedness property ---------------------------

/// Two-state, two-action, horizon-3 MDP small enough to enumerate exactly.
/// The shield is a deterministic, parameter-independent override map from
/// (state, sampled action) to the played action; rewards and transitions see
/// the played action only.
struct TabularMdp {
    int n_states = 2;
    int n_actions = 2;
    int horizon = 3;
    int s0 = 0;
    double gamma = 0.9;
    // reward[s][u], transition[s][u] -> probability vector over next states
    std::array<std::array<double, 2>, 2> reward;
    std::array<std::array<std::array<double, 2>, 2>, 2> transition;
    std::function<int(int s, int a)> shield_map;
};

TabularMdp default_oracle_mdp(bool identity_shield = false);

/// Softmax policy over logits[s][a] with a temperature.
struct TabularPolicy {
    Eigen::Matrix2d logits;
    double temperature = 1.0;

    double prob(int s, int a) const;
    /// d/d logits of ln pi(a|s), flattened row-major (s*2 + a).
    Eigen::Vector4d logp_grad(int s, int a) const;
};

struct UnbiasednessReport {
    int n_samples = 0;
    Eigen::Vector4d exact_grad;
    Eigen::Vector4d mc_mean;
    Eigen::Vector4d mc_std;
    Eigen::Vector4d z_scores;
    double max_abs_z = 0.0;
    double estimator_variance = 0.0;  // mean over coordinates of per-coordinate variance
};

/// Exact policy gradient by full path enumeration.
Eigen::Vector4d exact_policy_gradient(const TabularMdp& mdp, const TabularPolicy& policy);

/// Exact J(w) by enumeration (used by the finite-difference cross-check).
double exact_objective(const TabularMdp& mdp, const TabularPolicy& policy);

/// Monte-Carlo mean of the REINFORCE estimator vs the exact gradient,
/// reported as per-coordinate z-scores.
UnbiasednessReport unbiasedness_check(const TabularMdp& mdp, const TabularPolicy& policy,
                                      int n_samples, uint64_t seed);

}  // namespace safectl::rl

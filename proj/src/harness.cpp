#include "safectl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace safectl::harness {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path.string());
    const int d = traj.samples.empty() ? 0 : static_cast<int>(traj.samples.front().x.size());
    const int p = traj.samples.empty() ? 0 : static_cast<int>(traj.samples.front().u.size());
    out << "t";
    for (int i = 0; i < d; ++i) out << ",x" << i;
    for (int i = 0; i < p; ++i) out << ",u" << i;
    out << ",phi,activated\n";
    for (const auto& s : traj.samples) {
        out << format_double(s.t);
        for (int i = 0; i < d; ++i) out << "," << format_double(s.x(i));
        for (int i = 0; i < p; ++i) out << "," << format_double(s.u(i));
        out << "," << format_double(s.phi) << "," << (s.activated ? 1 : 0) << "\n";
    }
}

void write_training_csv(const std::filesystem::path& path,
                        const std::vector<rl::EpisodeRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path.string());
    out << "episode,steps,return,success,violations,min_phi,cost_sum\n";
    for (const auto& r : rows) {
        out << r.episode << "," << r.steps << "," << format_double(r.return_) << ","
            << (r.success ? 1 : 0) << "," << r.violations << "," << format_double(r.min_phi)
            << "," << format_double(r.cost_sum) << "\n";
    }
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t workers = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("SAFECTL_WORKERS")) {
        const long v = std::atol(env);
        if (v >= 1) workers = static_cast<std::size_t>(v);
    }
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// --- Config loading ----------------------------------------------------------

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    const IniFile ini = IniFile::parse_file(path);
    ExperimentConfig cfg;
    cfg.config_path = path.string();
    cfg.config_hash = ini.content_hash();

    cfg.scenario = ini.require_string("experiment", "scenario");
    {
        std::vector<double> seeds = ini.get_doubles("experiment", "seeds", {0.0});
        cfg.seeds.clear();
        for (double s : seeds) cfg.seeds.push_back(static_cast<uint64_t>(s));
    }
    cfg.out_dir = ini.get_string("experiment", "out", "out/" + cfg.scenario);
    if (ini.has("experiment", "x0")) {
        const auto v = ini.get_doubles("experiment", "x0", {});
        cfg.x0 = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
    }

    cfg.dt = ini.get_double("integrator", "dt", cfg.dt);
    cfg.horizon = ini.get_double("integrator", "horizon", cfg.horizon);
    const std::string method = ini.get_string("integrator", "method", "rk4");
    if (method == "euler") {
        cfg.method = IntegrationMethod::euler;
    } else if (method == "rk4") {
        cfg.method = IntegrationMethod::rk4;
    } else {
        throw ConfigError(path.string() + ": unknown integrator method '" + method + "'");
    }

    cfg.filter.theta = ini.get_double("filter", "theta", cfg.filter.theta);
    cfg.filter.eta = ini.get_double("filter", "eta", cfg.filter.eta);
    cfg.filter.slack = ini.get_double("filter", "slack", cfg.filter.slack);
    cfg.filter.xdot_tol = ini.get_double("filter", "xdot_tol", cfg.filter.xdot_tol);
    if (ini.has("filter", "clip_low")) cfg.filter.clip_low = ini.get_double("filter", "clip_low", 0);
    if (ini.has("filter", "clip_high"))
        cfg.filter.clip_high = ini.get_double("filter", "clip_high", 0);
    if (ini.has("filter", "frozen_gamma")) {
        Eigen::MatrixXd g(1, 1);
        g << ini.get_double("filter", "frozen_gamma", 0.0);
        cfg.filter.frozen_gamma = g;
    }

    cfg.lambda_hat = ini.get_double("model", "lambda_hat", cfg.lambda_hat);
    cfg.lower_ratio = ini.get_double("model", "lower_ratio", cfg.lower_ratio);
    cfg.upper_ratio = ini.get_double("model", "upper_ratio", cfg.upper_ratio);

    if (ini.has("baselines", "enabled")) {
        cfg.baseline_list.clear();
        for (const auto& name : ini.get_strings("baselines", "enabled", {})) {
            cfg.baseline_list.push_back(baselines::baseline_from_name(name));
        }
    }
    auto& bp = cfg.baseline_params;
    bp.gamma_rate = ini.get_double("baselines", "gamma_rate", bp.gamma_rate);
    bp.nu_tilde0 = ini.get_double("baselines", "nu_tilde0", bp.nu_tilde0);
    bp.d_bound = ini.get_double("baselines", "d_bound", bp.d_bound);
    bp.smid_period = ini.get_double("baselines", "smid_period", bp.smid_period);
    bp.cbc_alpha_box = ini.get_double("baselines", "cbc_alpha_box", bp.cbc_alpha_box);
    bp.cbc_beta_min = ini.get_double("baselines", "cbc_beta_min", bp.cbc_beta_min);
    bp.cbc_beta_max = ini.get_double("baselines", "cbc_beta_max", bp.cbc_beta_max);
    bp.cbc_eta = ini.get_double("baselines", "cbc_eta", bp.cbc_eta);

    auto& t = cfg.train;
    t.gamma = ini.get_double("rl", "gamma", t.gamma);
    t.episodes = static_cast<int>(ini.get_int("rl", "episodes", t.episodes));
    t.step_size = ini.get_double("rl", "step_size", t.step_size);
    t.ts = ini.get_double("rl", "ts", t.ts);
    t.max_steps = static_cast<int>(ini.get_int("rl", "max_steps", t.max_steps));
    t.hidden = static_cast<int>(ini.get_int("rl", "hidden", t.hidden));
    t.sigma = ini.get_double("rl", "sigma", t.sigma);
    t.shield_on = ini.get_bool("rl", "shield", t.shield_on);
    t.trigger_theta = ini.get_double("rl", "trigger_theta", t.trigger_theta);
    t.eta = ini.get_double("rl", "eta", t.eta);
    t.slack = ini.get_double("rl", "slack", t.slack);
    t.xdot_tol = ini.get_double("rl", "xdot_tol", t.xdot_tol);
    t.action_clip = ini.get_double("rl", "action_clip", t.action_clip);
    t.control_clip = ini.get_double("rl", "control_clip", t.control_clip);
    t.subtract_return_mean = ini.get_bool("rl", "subtract_return_mean", t.subtract_return_mean);
    cfg.train_paired = ini.get_bool("rl", "paired", cfg.train_paired);

    cfg.unbiasedness_samples =
        static_cast<int>(ini.get_int("unbiasedness", "samples", cfg.unbiasedness_samples));
    cfg.unbiasedness_temperature =
        ini.get_double("unbiasedness", "temperature", cfg.unbiasedness_temperature);

    return cfg;
}

// --- Scenario helpers --------------------------------------------------------

namespace {

char hex_digit(uint64_t v) { return "0123456789abcdef"[v & 0xf]; }

std::string hex64(uint64_t v) {
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = hex_digit(v);
        v >>= 4;
    }
    return s;
}

SvdUncertaintyModel scalar_model(const ExperimentConfig& cfg) {
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    Eigen::VectorXd lam(1), lo(1), hi(1);
    lam << cfg.lambda_hat;
    lo << cfg.lower_ratio;
    hi << cfg.upper_ratio;
    auto model = SvdUncertaintyModel::make(one, one, lam, lo, hi);
    // The benchmark's true g is 1; the declared bounds must admit it.
    TrueActuation::make(model, Eigen::VectorXd::Ones(1));
    return model;
}

StateVec default_x0(const ExperimentConfig& cfg, double fallback) {
    if (cfg.x0) return *cfg.x0;
    StateVec x(1);
    x << fallback;
    return x;
}

struct ArtifactSink {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;
    std::mutex mutex;

    std::filesystem::path reserve(const std::string& name) {
        std::lock_guard<std::mutex> lock(mutex);
        files.push_back(dir / name);
        return files.back();
    }
};

nlohmann::json trajectory_metrics(const Trajectory& traj, double theta) {
    nlohmann::json j;
    j["min_phi"] = traj.min_phi();
    j["violations"] = traj.count_violations();
    j["safety_rate"] = traj.safety_rate();
    const auto rec = traj.first_time_phi_at_least(theta);
    if (rec) j["recovery_time"] = *rec;
    return j;
}

ScenarioOutcome scenario_invariance(const ExperimentConfig& cfg, ArtifactSink& sink) {
    ScenarioOutcome out;
    const auto bench = linear1d();
    const auto model = scalar_model(cfg);
    const StateVec x0 = default_x0(cfg, 0.1999);
    const IntegratorConfig icfg{cfg.dt, cfg.method, cfg.horizon};

    struct SeedResult {
        Trajectory filtered, nominal;
    };
    std::vector<SeedResult> results(cfg.seeds.size());
    std::vector<std::filesystem::path> fpaths(cfg.seeds.size()), npaths(cfg.seeds.size());
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        fpaths[i] = sink.reserve("filtered_seed" + std::to_string(cfg.seeds[i]) + ".csv");
        npaths[i] = sink.reserve("nominal_seed" + std::to_string(cfg.seeds[i]) + ".csv");
    }
    parallel_for(cfg.seeds.size(), [&](std::size_t i) {
        auto ctrl = filtered_controller(cfg.filter, model, bench.barrier, bench.nominal);
        results[i].filtered =
            simulate(bench.sys, icfg, bench.barrier, ctrl, x0, bench.nominal(x0));
        results[i].nominal = simulate(bench.sys, icfg, bench.barrier,
                                      state_feedback(bench.nominal), x0, bench.nominal(x0));
        write_trajectory_csv(fpaths[i], results[i].filtered);
        write_trajectory_csv(npaths[i], results[i].nominal);
    });

    bool filtered_safe = true;
    bool nominal_exits = true;
    nlohmann::json per_seed = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        const auto& r = results[i];
        nlohmann::json j;
        j["seed"] = cfg.seeds[i];
        j["filtered"] = trajectory_metrics(r.filtered, cfg.filter.theta);
        j["nominal"] = trajectory_metrics(r.nominal, cfg.filter.theta);
        per_seed.push_back(j);
        filtered_safe = filtered_safe && (r.filtered.count_violations() == 0);
        nominal_exits = nominal_exits && (r.nominal.min_phi() < 0.0);
    }
    out.metrics["per_seed"] = per_seed;
    out.metrics["x0"] = x0(0);
    out.checks.push_back({"filtered run has zero violations (min phi >= 0)", filtered_safe,
                          "min_phi=" + format_double(results.front().filtered.min_phi())});
    out.checks.push_back({"unfiltered nominal run exits the safe set", nominal_exits,
                          "min_phi=" + format_double(results.front().nominal.min_phi())});
    return out;
}

ScenarioOutcome scenario_recovery(const ExperimentConfig& cfg, ArtifactSink& sink) {
    ScenarioOutcome out;
    const auto bench = linear1d();
    const auto model = scalar_model(cfg);
    const StateVec x0 = default_x0(cfg, 0.25);
    const IntegratorConfig icfg{cfg.dt, cfg.method, cfg.horizon};

    auto ctrl = filtered_controller(cfg.filter, model, bench.barrier, bench.nominal);
    const Trajectory traj =
        simulate(bench.sys, icfg, bench.barrier, ctrl, x0, bench.nominal(x0));
    write_trajectory_csv(sink.reserve("recovery.csv"), traj);

    const double phi0 = phi_eval(bench.barrier, x0);
    const double bound = (cfg.filter.theta - phi0) / cfg.filter.eta + 5.0 * cfg.dt;
    const auto rec = traj.first_time_phi_at_least(cfg.filter.theta);

    out.metrics = trajectory_metrics(traj, cfg.filter.theta);
    out.metrics["phi_x0"] = phi0;
    out.metrics["recovery_bound"] = bound;
    out.metrics["x0"] = x0(0);
    const bool ok = rec.has_value() && *rec <= bound;
    out.checks.push_back({"recovery within (theta - phi(x0))/eta + 5 dt", ok,
                          rec ? "t=" + format_double(*rec) + " bound=" + format_double(bound)
                              : "never reached the subset"});
    return out;
}

ScenarioOutcome scenario_baselines(const ExperimentConfig& cfg, ArtifactSink& sink) {
    ScenarioOutcome out;
    const auto bench = linear1d();
    const auto model = scalar_model(cfg);
    const StateVec x0 = default_x0(cfg, 0.1999);
    const IntegratorConfig icfg{cfg.dt, cfg.method, cfg.horizon};

    std::vector<std::string> names{"alg1"};
    std::vector<Controller> controllers{
        filtered_controller(cfg.filter, model, bench.barrier, bench.nominal)};
    for (const auto kind : cfg.baseline_list) {
        names.emplace_back(baselines::baseline_name(kind));
        controllers.push_back(
            baselines::make_baseline_controller(kind, cfg.dt, cfg.baseline_params));
    }

    std::vector<Trajectory> trajs(names.size());
    std::vector<std::filesystem::path> paths(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        paths[i] = sink.reserve("traj_" + names[i] + ".csv");
    }
    parallel_for(names.size(), [&](std::size_t i) {
        trajs[i] = simulate(bench.sys, icfg, bench.barrier, controllers[i], x0,
                            bench.nominal(x0));
        write_trajectory_csv(paths[i], trajs[i]);
    });

    std::ofstream table(sink.reserve("comparison.csv"));
    table << "controller,violations,min_phi,safety_rate,recovery_time\n";
    std::string human = "controller    violations  min_phi       safety_rate\n";
    nlohmann::json rows = nlohmann::json::array();
    std::size_t alg1_violations = 0;
    std::size_t worst_baseline_violations = 0;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& t = trajs[i];
        nlohmann::json j = trajectory_metrics(t, cfg.filter.theta);
        j["controller"] = names[i];
        rows.push_back(j);
        const auto rec = t.first_time_phi_at_least(cfg.filter.theta);
        table << names[i] << "," << t.count_violations() << "," << format_double(t.min_phi())
              << "," << format_double(t.safety_rate()) << ","
              << (rec ? format_double(*rec) : "") << "\n";
        char line[128];
        std::snprintf(line, sizeof(line), "%-12s  %10zu  %-12.6g  %.6f\n", names[i].c_str(),
                      t.count_violations(), t.min_phi(), t.safety_rate());
        human += line;
        if (i == 0) {
            alg1_violations = t.count_violations();
        } else {
            worst_baseline_violations =
                std::max(worst_baseline_violations, t.count_violations());
        }
    }
    out.metrics["rows"] = rows;
    out.metrics["table"] = human;
    out.metrics["x0"] = x0(0);
    out.checks.push_back({"correction controller has zero violations", alg1_violations == 0,
                          "violations=" + std::to_string(alg1_violations)});
    out.checks.push_back({"at least one baseline violates at least once",
                          worst_baseline_violations >= 1,
                          "worst=" + std::to_string(worst_baseline_violations)});
    return out;
}

ScenarioOutcome scenario_adversarial(const ExperimentConfig& cfg, ArtifactSink& sink) {
    ScenarioOutcome out;
    const auto bench = linear1d();
    StateVec x0(1);
    x0 << 0.2;  // boundary of S = [-0.2, 0.2]
    if (cfg.x0) x0 = *cfg.x0;
    const StateVec grad = bench.barrier.gradient(x0);
    const double grad_sq = grad.squaredNorm();

    std::mt19937_64 rng(cfg.seeds.front());
    std::normal_distribution<double> normal(0.0, 1.0);
    struct Probe {
        std::string name;
        ActionVec u0;
    };
    std::vector<Probe> probes;
    probes.push_back({"zero", ActionVec::Zero(1)});
    ActionVec random_u(1);
    random_u << normal(rng);
    probes.push_back({"random", random_u});
    // Best single-sample effort: push along the barrier gradient through g.
    probes.push_back({"gradient_ascent",
                      ActionVec(bench.sys.actuation(x0).transpose() * grad)});

    std::ofstream csv(sink.reserve("adversarial.csv"));
    csv << "policy,u0,phi_dot_plus,minus_grad_norm_sq,rel_err,phi_after_step\n";
    nlohmann::json rows = nlohmann::json::array();
    bool identity_ok = true;
    bool leaves_safe_set = true;
    for (const auto& p : probes) {
        const Eigen::VectorXd f = adversarial_f(bench.barrier, bench.sys.actuation, x0, p.u0);
        const Eigen::VectorXd xdot = f + bench.sys.actuation(x0) * p.u0;
        const double phi_dot = grad.dot(xdot);
        const double rel_err = std::abs(phi_dot + grad_sq) / grad_sq;
        const StateVec x1 = x0 + cfg.dt * xdot;
        const double phi_after = phi_eval(bench.barrier, x1);
        csv << p.name << "," << format_double(p.u0(0)) << "," << format_double(phi_dot) << ","
            << format_double(-grad_sq) << "," << format_double(rel_err) << ","
            << format_double(phi_after) << "\n";
        nlohmann::json j;
        j["policy"] = p.name;
        j["u0"] = p.u0(0);
        j["phi_dot_plus"] = phi_dot;
        j["rel_err"] = rel_err;
        j["phi_after_step"] = phi_after;
        rows.push_back(j);
        identity_ok = identity_ok && (rel_err <= 1e-12);
        leaves_safe_set = leaves_safe_set && (phi_after < 0.0);
    }
    out.metrics["rows"] = rows;
    out.metrics["minus_grad_norm_sq"] = -grad_sq;
    out.checks.push_back(
        {"phi_dot_plus equals -|grad phi|^2 to machine precision", identity_ok, ""});
    out.checks.push_back({"one Euler step leaves the safe set", leaves_safe_set, ""});
    return out;
}

ScenarioOutcome scenario_unbiasedness(const ExperimentConfig& cfg, ArtifactSink& sink) {
    ScenarioOutcome out;
    rl::TabularPolicy policy;
    policy.logits << 0.4, -0.2, 0.1, 0.3;
    policy.temperature = cfg.unbiasedness_temperature;

    const auto shielded = rl::unbiasedness_check(rl::default_oracle_mdp(false), policy,
                                                 cfg.unbiasedness_samples, cfg.seeds.front());
    const auto identity = rl::unbiasedness_check(rl::default_oracle_mdp(true), policy,
                                                 cfg.unbiasedness_samples, cfg.seeds.front() + 1);

    auto to_json = [](const rl::UnbiasednessReport& r) {
        nlohmann::json j;
        j["n_samples"] = r.n_samples;
        j["max_abs_z"] = r.max_abs_z;
        for (int i = 0; i < 4; ++i) {
            j["exact_grad"].push_back(r.exact_grad(i));
            j["mc_mean"].push_back(r.mc_mean(i));
            j["z_scores"].push_back(r.z_scores(i));
        }
        return j;
    };
    out.metrics["shielded"] = to_json(shielded);
    out.metrics["identity_shield"] = to_json(identity);

    std::ofstream csv(sink.reserve("unbiasedness.csv"));
    csv << "variant,coordinate,exact,mc_mean,z\n";
    for (int i = 0; i < 4; ++i) {
        csv << "shielded," << i << "," << format_double(shielded.exact_grad(i)) << ","
            << format_double(shielded.mc_mean(i)) << "," << format_double(shielded.z_scores(i))
            << "\n";
    }
    for (int i = 0; i < 4; ++i) {
        csv << "identity," << i << "," << format_double(identity.exact_grad(i)) << ","
            << format_double(identity.mc_mean(i)) << "," << format_double(identity.z_scores(i))
            << "\n";
    }
    out.checks.push_back({"shielded estimator: every |z| < 4", shielded.max_abs_z < 4.0,
                          "max |z|=" + format_double(shielded.max_abs_z)});
    out.checks.push_back({"identity-shield estimator: every |z| < 4", identity.max_abs_z < 4.0,
                          "max |z|=" + format_double(identity.max_abs_z)});
    return out;
}

ScenarioOutcome scenario_train(const ExperimentConfig& cfg, ArtifactSink& sink) {
    ScenarioOutcome out;
    const auto bench = vehicle4d();
    rl::Environment env = rl::make_environment(bench);
    if (cfg.x0) env.x0 = *cfg.x0;

    struct SeedResult {
        rl::TrainResult shielded, unshielded;
    };
    std::vector<SeedResult> results(cfg.seeds.size());
    std::vector<std::filesystem::path> spaths(cfg.seeds.size()), upaths(cfg.seeds.size());
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        spaths[i] = sink.reserve("train_shielded_seed" + std::to_string(cfg.seeds[i]) + ".csv");
        if (cfg.train_paired) {
            upaths[i] =
                sink.reserve("train_unshielded_seed" + std::to_string(cfg.seeds[i]) + ".csv");
        }
    }
    parallel_for(cfg.seeds.size(), [&](std::size_t i) {
        rl::TrainConfig t = cfg.train;
        t.seed = cfg.seeds[i];
        {
            rl::TrainConfig ts = t;
            ts.shield_on = true;
            rl::GaussianPolicy policy(env.sys.dim_state, t.hidden, env.sys.dim_action, t.sigma,
                                      t.seed);
            results[i].shielded = rl::train(env, policy, ts);
            write_training_csv(spaths[i], results[i].shielded.rows);
        }
        if (cfg.train_paired) {
            rl::TrainConfig tu = t;
            tu.shield_on = false;
            rl::GaussianPolicy policy(env.sys.dim_state, t.hidden, env.sys.dim_action, t.sigma,
                                      t.seed);
            results[i].unshielded = rl::train(env, policy, tu);
            write_training_csv(upaths[i], results[i].unshielded.rows);
        }
    });

    auto seed_json = [](const rl::TrainResult& r) {
        nlohmann::json j;
        j["violation_fraction"] = r.violation_fraction();
        j["violations_after_entry"] = r.total_violations_after_entry;
        j["total_samples"] = r.total_samples;
        int successes = 0;
        double mean_steps = 0.0;
        for (const auto& row : r.rows) {
            successes += row.success ? 1 : 0;
            mean_steps += row.steps;
        }
        if (!r.rows.empty()) mean_steps /= static_cast<double>(r.rows.size());
        j["successes"] = successes;
        j["mean_steps"] = mean_steps;
        return j;
    };

    std::size_t shielded_after_entry = 0;
    std::size_t unshielded_violations = 0;
    std::size_t unshielded_samples = 0;
    nlohmann::json per_seed = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        nlohmann::json j;
        j["seed"] = cfg.seeds[i];
        j["shielded"] = seed_json(results[i].shielded);
        if (cfg.train_paired) j["unshielded"] = seed_json(results[i].unshielded);
        per_seed.push_back(j);
        shielded_after_entry += results[i].shielded.total_violations_after_entry;
        unshielded_violations += results[i].unshielded.total_violations;
        unshielded_samples += results[i].unshielded.total_samples;
    }
    out.metrics["per_seed"] = per_seed;
    out.metrics["phi_x0"] = results.empty() ? 0.0 : results.front().shielded.initial_phi;
    out.metrics["shielded_violations_after_entry"] = shielded_after_entry;

    out.checks.push_back({"shielded training: zero violations after first entry into S",
                          shielded_after_entry == 0,
                          "count=" + std::to_string(shielded_after_entry)});
    if (cfg.train_paired) {
        const double frac = unshielded_samples == 0
                                ? 0.0
                                : static_cast<double>(unshielded_violations) /
                                      static_cast<double>(unshielded_samples);
        out.metrics["unshielded_violation_fraction"] = frac;
        out.checks.push_back({"unshielded training has a positive violation fraction",
                              frac > 0.0, "fraction=" + format_double(frac)});
    }
    return out;
}

void write_manifest(const ExperimentConfig& cfg, const ScenarioOutcome& out,
                    const std::vector<std::filesystem::path>& artifacts) {
    nlohmann::json manifest;
    manifest["scenario"] = cfg.scenario;
    manifest["config_path"] = cfg.config_path;
    manifest["config_fnv64"] = hex64(cfg.config_hash);
    manifest["seeds"] = cfg.seeds;
    manifest["dt"] = cfg.dt;
    nlohmann::json files = nlohmann::json::array();
    for (const auto& path : artifacts) {
        nlohmann::json f;
        f["file"] = path.filename().string();
        f["fnv64"] = hex64(fnv1a64_file(path));
        f["bytes"] = std::filesystem::file_size(path);
        files.push_back(f);
    }
    manifest["artifacts"] = files;
    bool all = out.all_passed();
    manifest["checks_passed"] = all;
    std::ofstream mf(cfg.out_dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

}  // namespace

ScenarioOutcome run_scenario(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    ArtifactSink sink;
    sink.dir = cfg.out_dir;

    ScenarioOutcome out;
    if (cfg.scenario == "invariance_1d") {
        out = scenario_invariance(cfg, sink);
    } else if (cfg.scenario == "recovery_1d") {
        out = scenario_recovery(cfg, sink);
    } else if (cfg.scenario == "baselines_1d") {
        out = scenario_baselines(cfg, sink);
    } else if (cfg.scenario == "adversarial") {
        out = scenario_adversarial(cfg, sink);
    } else if (cfg.scenario == "unbiasedness") {
        out = scenario_unbiasedness(cfg, sink);
    } else if (cfg.scenario == "train_4d") {
        out = scenario_train(cfg, sink);
    } else {
        throw ConfigError("unknown scenario '" + cfg.scenario + "'");
    }

    out.metrics["scenario"] = cfg.scenario;
    out.metrics["seeds"] = cfg.seeds;
    {
        const auto metrics_path = sink.reserve("metrics.json");
        std::ofstream mf(metrics_path);
        mf << out.metrics.dump(2) << "\n";
    }
    out.artifacts = sink.files;
    write_manifest(cfg, out, sink.files);
    return out;
}

}  // namespace safectl::harness

#include "safectl/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace safectl::harness {

namespace {

struct Overrides {
    std::vector<uint64_t> seeds;
    std::string out;
    double dt = -1.0;
    int episodes = -1;

    void apply(ExperimentConfig& cfg) const {
        if (!seeds.empty()) cfg.seeds = seeds;
        if (!out.empty()) cfg.out_dir = out;
        if (dt > 0.0) cfg.dt = dt;
        if (episodes > 0) cfg.train.episodes = episodes;
    }
};

void print_checks(const ScenarioOutcome& out) {
    for (const auto& c : out.checks) {
        std::cout << (c.passed ? "[PASS] " : "[FAIL] ") << c.name;
        if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
        std::cout << "\n";
    }
}

int run_command(const std::string& config_path, const Overrides& ov, bool check_mode,
                const std::string& required_scenario = "") {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    ov.apply(cfg);
    if (!required_scenario.empty() && cfg.scenario != required_scenario) {
        throw ConfigError("this command needs scenario = " + required_scenario +
                          ", config has '" + cfg.scenario + "'");
    }
    const ScenarioOutcome out = run_scenario(cfg);
    if (out.metrics.contains("table")) {
        std::cout << out.metrics["table"].get<std::string>();
    }
    std::cout << "scenario " << cfg.scenario << ": artifacts in " << cfg.out_dir.string()
              << "\n";
    print_checks(out);
    if (check_mode && !out.all_passed()) return kExitCheckFailed;
    return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"safe-control experiment harness"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "experiment config file")->required();
        sub->add_option("--seed", ov.seeds, "override the seed list");
        sub->add_option("--out", ov.out, "override the output directory");
        sub->add_option("--dt", ov.dt, "override the integrator step");
        sub->add_option("--episodes", ov.episodes, "override the episode count");
    };

    auto* run = app.add_subcommand("run", "run a scenario and write its artifacts");
    add_common(run);
    auto* compare = app.add_subcommand("compare", "paired baseline comparison table");
    add_common(compare);
    auto* train = app.add_subcommand("train", "shielded policy-gradient training");
    add_common(train);
    auto* check = app.add_subcommand("check", "run a scenario and gate on its checks");
    add_common(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run->parsed()) return run_command(config_path, ov, false);
        if (compare->parsed()) return run_command(config_path, ov, false, "baselines_1d");
        if (train->parsed()) return run_command(config_path, ov, false, "train_4d");
        if (check->parsed()) return run_command(config_path, ov, true);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SimulationFault& e) {
        std::cerr << "simulation fault: " << e.what() << "\n";
        try {
            write_trajectory_csv("fault_dump.csv", e.partial);
            std::cerr << "partial trajectory dumped to fault_dump.csv\n";
        } catch (...) {
        }
        return kExitSimFault;
    }
    return kExitOk;
}

}  // namespace safectl::harness

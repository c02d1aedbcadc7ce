#pragma once

#include "safectl/baselines.hpp"
#include "safectl/config.hpp"
#include "safectl/core.hpp"
#include "safectl/dynamics.hpp"
#include "safectl/rl.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace safectl::harness {

// Exit code contract shared by the CLI and the check mode.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSimFault = 3;
inline constexpr int kExitCheckFailed = 4;

struct ExperimentConfig {
    std::string scenario;
    std::vector<uint64_t> seeds{0};
    std::filesystem::path out_dir = "out";
    std::optional<Eigen::VectorXd> x0;

    double dt = 2.5e-4;
    IntegrationMethod method = IntegrationMethod::rk4;
    double horizon = 0.25;

    FilterConfig filter{0.001, 1.0, 1e-3, 1e-9, std::nullopt, std::nullopt, std::nullopt};

    double lambda_hat = 1.0;
    double lower_ratio = 0.5;
    double upper_ratio = 2.0;

    std::vector<baselines::BaselineKind> baseline_list{
        baselines::BaselineKind::acbf, baselines::BaselineKind::racbf,
        baselines::BaselineKind::racbfs, baselines::BaselineKind::cbc};
    baselines::BaselineParams baseline_params;

    rl::TrainConfig train;
    bool train_paired = true;  // also run the unshielded twin under the same seeds

    int unbiasedness_samples = 100000;
    double unbiasedness_temperature = 1.0;

    std::string config_path;  // where this came from, for the manifest
    uint64_t config_hash = 0;

    static ExperimentConfig load(const std::filesystem::path& path);
};

struct CheckLine {
    std::string name;
    bool passed;
    std::string detail;
};

struct ScenarioOutcome {
    nlohmann::json metrics;
    std::vector<CheckLine> checks;
    std::vector<std::filesystem::path> artifacts;

    bool all_passed() const {
        for (const auto& c : checks) {
            if (!c.passed) return false;
        }
        return true;
    }
};

/// Runs the configured scenario, writes trajectory CSVs, metrics.json and
/// manifest.json under cfg.out_dir, and returns the metrics plus the
/// scenario's built-in pass/fail checks (thresholds fixed in code).
ScenarioOutcome run_scenario(const ExperimentConfig& cfg);

/// Uniform CSV float formatting (17 significant digits) so identical runs are
/// byte-identical.
std::string format_double(double v);

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
void write_training_csv(const std::filesystem::path& path,
                        const std::vector<rl::EpisodeRow>& rows);

/// Runs fn(i) for i in [0, n) on a small worker pool; pool size comes from
/// SAFECTL_WORKERS or hardware concurrency. The first exception thrown by a
/// worker is re-thrown after the join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Entry point used by the CLI binary (and by tests that exercise exit codes).
int cli_main(int argc, const char* const* argv);

}  // namespace safectl::harness

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "zerolocus/errors.hpp"
#include "zerolocus/io.hpp"

namespace zerolocus {

/// Exit statuses shared by every verb.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

int exit_code_for(ErrorKind kind) noexcept;

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out = ".";
    bool plain = false;

    // Network and data shape.
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::size_t points = 4;
    std::vector<std::size_t> widths;  // empty: command default
    std::string activation = "smoolu";
    std::string labels = "uniform";   // uniform | teacher
    std::vector<std::size_t> teacher_widths{8};

    // Inputs produced by earlier stages.
    std::filesystem::path data;
    std::filesystem::path params;
    std::vector<std::filesystem::path> reports;

    // Tolerances.
    double rank_tol = kDefaultRankTol;
    double gate = kZeroLossGate;
    double corrector_tol = 1e-12;
    double certificate_residual = 1e-8;
    double correct_below = 1e-8;

    // Command knobs.
    double epsilon = 0.0;
    double learning_rate = 1e-2;
    std::size_t iters = 1000;
    double target_loss = 1e-8;
    double init_scale = 1.0;
    bool correct = false;
    std::size_t steps = 100;
    double step_size = 1e-2;
    std::size_t probes = 5;
    std::string format = "text";      // text | csv

    /// Throws Error(usage, "bad_config") on non-positive counts or tolerances.
    void validate() const;
};

Json config_to_json(const ExperimentConfig& config);

/// Outcome of one verb: the report written (if any) and the exit status.
struct CommandResult {
    int exit_code = kExitOk;
    Json report;
    std::vector<std::filesystem::path> written;
};

CommandResult cmd_gen_data(const ExperimentConfig& config);
CommandResult cmd_fit_exact(const ExperimentConfig& config);
CommandResult cmd_train(const ExperimentConfig& config);
CommandResult cmd_analyze(const ExperimentConfig& config);
CommandResult cmd_walk(const ExperimentConfig& config);
/// Aggregates report files into one row each; writes <out>/summary.csv and
/// prints an aligned table (or CSV) to `out`. Skipped files go to `err`.
CommandResult cmd_report(const ExperimentConfig& config, std::ostream& out, std::ostream& err, bool color);

/// Parses argv-style arguments (without the program name), runs the verb and
/// returns the exit status. Failures print one JSON line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zerolocus

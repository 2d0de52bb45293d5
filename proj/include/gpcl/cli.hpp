#pragma once

#include "gpcl/loss_engine.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gpcl {

enum ExitCode : int { kExitOk = 0, kExitNumerical = 1, kExitInput = 2 };

struct RunConfig {
    std::string command;
    std::string curve_path;
    std::string quotes_path;
    std::string schedule_path;
    std::optional<std::string> valuation_date; // overrides the quotes file comment
    ModelKind model = ModelKind::gpcl;
    PoolSpec pool;
    double grid_step_days = 30.0;
    std::size_t paths = 100000;
    std::uint64_t seed = 20061002;
    std::vector<double> times; // years; empty means the schedule knots
    std::string out_dir = ".";
    bool strict = false;
    bool simulate = false;
    int max_modes = 7;
    int candidate_budget = 200;
    int refine_budget = 4000;
};

/// Each command writes its artifacts under `config.out_dir` and a short
/// human-readable summary to `log`. Returns an ExitCode.
int cmd_calibrate(const RunConfig& config, std::ostream& log);
int cmd_dist(const RunConfig& config, std::ostream& log);
int cmd_intensity_curve(const RunConfig& config, std::ostream& log);
int cmd_price(const RunConfig& config, std::ostream& log);

/// Dispatches on `config.command` and maps exceptions to exit codes.
int run_command(const RunConfig& config, std::ostream& log, std::ostream& err);

/// Parses "3,5,7,10" into years.
std::vector<double> parse_times(const std::string& text);

} // namespace gpcl

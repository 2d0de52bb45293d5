#include "gpcl/cli.hpp"

#include "gpcl/calibrator.hpp"
#include "gpcl/error.hpp"
#include "gpcl/io.hpp"
#include "gpcl/market_data.hpp"
#include "gpcl/pricer.hpp"
#include "gpcl/simulator.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace gpcl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const std::string& path, const std::string& what) {
    if (path.empty())
        throw InputError("missing --" + what + " argument");
    if (!fs::is_regular_file(path))
        throw InputError(what + " file not found: " + path);
}

fs::path out_path(const RunConfig& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return fs::path(c.out_dir) / name;
}

json config_json(const RunConfig& c) {
    return {{"command", c.command},
            {"curve", c.curve_path},
            {"quotes", c.quotes_path},
            {"schedule", c.schedule_path},
            {"valuation_date", c.valuation_date.value_or("")},
            {"model", to_string(c.model)},
            {"pool_size", c.pool.size},
            {"recovery", c.pool.recovery},
            {"grid_step_days", c.grid_step_days},
            {"paths", c.paths},
            {"seed", c.seed},
            {"times", c.times},
            {"strict", c.strict},
            {"simulate", c.simulate},
            {"max_modes", c.max_modes},
            {"candidate_budget", c.candidate_budget},
            {"refine_budget", c.refine_budget}};
}

std::string config_hash(const RunConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char ch : config_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_run_record(const RunConfig& c) {
    save_json_file(out_path(c, "run.json").string(),
                   {{"config", config_json(c)}, {"config_hash", config_hash(c)}, {"seed", c.seed}});
}

void stamp_csv(std::ostream& out, const RunConfig& c) {
    out << "# config_hash=" << config_hash(c) << ",seed=" << c.seed << '\n';
}

json stamp(json j, const RunConfig& c) {
    j["config_hash"] = config_hash(c);
    j["seed"] = c.seed;
    return j;
}

QuotePanel load_panel(const RunConfig& c) {
    require_file(c.quotes_path, "quotes");
    if (c.valuation_date) {
        const Date d = parse_date(*c.valuation_date);
        return load_quotes_file(c.quotes_path, &d);
    }
    return load_quotes_file(c.quotes_path);
}

std::string time_label(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", t);
    return buf;
}

void print_error_table(std::ostream& log, const CalibrationProblem& problem, const ObjectiveValue& v) {
    log << "instrument  maturity   model(bp)     mid(bp)   width  epsilon\n";
    const auto& insts = problem.instruments();
    for (std::size_t i = 0; i < insts.size(); ++i) {
        char line[160];
        std::snprintf(line, sizeof line, "%-10s  %s  %10.3f  %10.3f  %6.2f  %7.3f\n", insts[i].name().c_str(),
                      format_date(insts[i].maturity).c_str(), v.model_values[i] * 1e4, insts[i].mid * 1e4,
                      insts[i].width * 1e4, v.errors[i]);
        log << line;
    }
    log << "objective f = " << v.f << '\n';
}

} // namespace

std::vector<double> parse_times(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty())
            continue;
        std::size_t used = 0;
        double t = 0.0;
        try {
            t = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || !(t >= 0.0))
            throw InputError("bad time '" + item + "' in --times");
        out.push_back(t);
    }
    return out;
}

int cmd_calibrate(const RunConfig& c, std::ostream& log) {
    const auto panel = load_panel(c);
    require_file(c.curve_path, "curve");
    auto curve = load_curve_file(c.curve_path, panel.valuation_date);
    const CalibrationProblem problem(panel, std::move(curve), c.pool, c.grid_step_days / 365.0);

    GreedyOptions opt;
    opt.model = c.model;
    opt.max_modes = c.max_modes;
    opt.candidate_budget = c.candidate_budget;
    opt.refine_budget = c.refine_budget;
    opt.seed = c.seed;
    const auto result = greedy_calibrate(problem, opt);

    save_json_file(out_path(c, "calibration.json").string(), stamp(calibration_json(result, problem), c));
    save_json_file(out_path(c, "schedule.json").string(), to_json(result.schedule));
    {
        std::ofstream eps(out_path(c, "epsilon.csv"));
        stamp_csv(eps, c);
        eps << "instrument";
        for (const auto d : problem.maturity_dates())
            eps << ',' << format_date(d);
        eps << '\n';
        for (const auto& row : calibration_json(result, problem)["epsilon"]) {
            eps << row["instrument"].get<std::string>();
            for (const auto& cell : row["errors"]) {
                eps << ',';
                if (!cell.is_null())
                    eps << std::fixed << std::setprecision(4) << cell.get<double>();
            }
            eps << '\n';
        }
    }
    write_run_record(c);

    log << to_string(c.model) << " calibration, amplitudes:";
    for (const int a : result.schedule.amplitudes())
        log << ' ' << a;
    log << '\n';
    print_error_table(log, problem, result.value);
    if (result.budget_warning) {
        log << "warning: optimizer evaluation budget exhausted\n";
        if (c.strict)
            return kExitNumerical;
    }
    return kExitOk;
}

int cmd_dist(const RunConfig& c, std::ostream& log) {
    require_file(c.schedule_path, "schedule");
    const auto schedule = load_schedule_file(c.schedule_path);
    schedule.check_pool(c.pool);
    const auto times = c.times.empty() ? std::vector<double>{3.0, 5.0, 7.0, 10.0} : c.times;
    const Strategy strategy = schedule.model() == ModelKind::gpl ? Strategy::capped : Strategy::cluster_adjusted;

    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const auto dist = loss_distribution(c.pool, schedule, t);
        const auto file = out_path(c, "distribution_" + time_label(t) + ".csv");
        std::ofstream out(file);
        out.precision(std::numeric_limits<double>::max_digits10);
        stamp_csv(out, c);
        if (!c.simulate) {
            write_distribution_csv(out, dist);
        } else {
            const auto emp = empirical_distribution(c.pool, schedule, strategy, t, c.paths, c.seed + i);
            out << "count,probability,frequency,std_err\n";
            for (std::size_t k = 0; k < dist.probs.size(); ++k)
                out << k << ',' << dist.probs[k] << ',' << emp.dist.probs[k] << ',' << emp.std_err[k] << '\n';
            save_json_file(out_path(c, "simulation_" + time_label(t) + ".json").string(),
                           stamp(run_metadata(emp, schedule), c));
        }
        log << "t = " << t << "y  mean defaults " << dist.mean() << "  P(C = M) " << dist.probs.back() << "  -> "
            << file.string() << '\n';
    }
    write_run_record(c);
    return kExitOk;
}

int cmd_intensity_curve(const RunConfig& c, std::ostream& log) {
    require_file(c.schedule_path, "schedule");
    const auto schedule = load_schedule_file(c.schedule_path);
    schedule.check_pool(c.pool);
    std::vector<double> rates;
    for (const auto& row : schedule.table())
        rates.push_back(row.back());
    const auto& amps = schedule.amplitudes();
    constexpr Strategy order[] = {Strategy::repeated, Strategy::capped, Strategy::name_adjusted,
                                  Strategy::cluster_adjusted};
    double base[4];
    for (int s = 0; s < 4; ++s) {
        base[s] = counting_intensity(order[s], c.pool, amps, rates, 0);
        if (!(base[s] > 0.0))
            throw InputError("schedule has zero intensity; ratios are undefined");
    }
    const auto file = out_path(c, "intensity_ratio.csv");
    std::ofstream out(file);
    out.precision(std::numeric_limits<double>::max_digits10);
    stamp_csv(out, c);
    out << "count,count_fraction,repeated,s0,s1,s2\n";
    for (int k = 0; k <= c.pool.size; ++k) {
        out << k << ',' << static_cast<double>(k) / c.pool.size;
        for (int s = 0; s < 4; ++s)
            out << ',' << counting_intensity(order[s], c.pool, amps, rates, k) / base[s];
        out << '\n';
    }
    write_run_record(c);
    log << "intensity ratios for " << c.pool.size + 1 << " counts -> " << file.string() << '\n';
    return kExitOk;
}

int cmd_price(const RunConfig& c, std::ostream& log) {
    const auto panel = load_panel(c);
    require_file(c.schedule_path, "schedule");
    const auto schedule = load_schedule_file(c.schedule_path);
    schedule.check_pool(c.pool);
    const auto file = out_path(c, "pricing.json");
    if (panel.empty()) {
        save_json_file(file.string(), stamp({{"units", "bp"}, {"instruments", json::array()}, {"objective", 0.0}}, c));
        write_run_record(c);
        log << "empty quote panel, nothing to price\n";
        return kExitOk;
    }
    require_file(c.curve_path, "curve");
    auto curve = load_curve_file(c.curve_path, panel.valuation_date);
    const CalibrationProblem problem(panel, std::move(curve), c.pool, c.grid_step_days / 365.0);
    const auto value = objective(schedule, problem);
    auto report = pricing_report(problem, value);
    json by_maturity = json::array();
    for (std::size_t k = 0; k < problem.knots().size(); ++k)
        by_maturity.push_back({{"maturity", format_date(problem.maturity_dates()[k])},
                               {"objective", objective_at_maturity(value, problem, problem.knots()[k])}});
    report["objective_by_maturity"] = by_maturity;
    save_json_file(file.string(), stamp(report, c));
    write_run_record(c);
    print_error_table(log, problem, value);
    return kExitOk;
}

int run_command(const RunConfig& c, std::ostream& log, std::ostream& err) {
    try {
        if (!(c.grid_step_days > 0.0) || c.paths < 1)
            throw InputError("grid step and path count must be positive");
        c.pool.validate();
        if (c.command == "calibrate")
            return cmd_calibrate(c, log);
        if (c.command == "dist")
            return cmd_dist(c, log);
        if (c.command == "intensity-curve")
            return cmd_intensity_curve(c, log);
        if (c.command == "price")
            return cmd_price(c, log);
        throw InputError("unknown command '" + c.command + "'");
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace gpcl

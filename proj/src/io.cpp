#include "gpcl/io.hpp"

#include "gpcl/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace gpcl {

using nlohmann::json;

json to_json(const IntensitySchedule& schedule) {
    return {{"model", to_string(schedule.model())},
            {"amplitudes", schedule.amplitudes()},
            {"knots_years", schedule.knots()},
            {"cumulated", schedule.table()}};
}

IntensitySchedule schedule_from_json(const json& j) {
    try {
        return IntensitySchedule(parse_model_kind(j.at("model").get<std::string>()),
                                 j.at("amplitudes").get<std::vector<int>>(),
                                 j.at("knots_years").get<std::vector<double>>(),
                                 j.at("cumulated").get<std::vector<std::vector<double>>>());
    } catch (const json::exception& e) {
        throw InputError(std::string("schedule JSON: ") + e.what());
    }
}

IntensitySchedule load_schedule_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open schedule file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("schedule file '" + path + "': " + e.what());
    }
    return schedule_from_json(j);
}

void save_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

std::string schedule_hash(const IntensitySchedule& schedule) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : to_json(schedule).dump()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_distribution_csv(std::ostream& out, const LossDistribution& dist) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    out << "count,probability\n";
    for (std::size_t c = 0; c < dist.probs.size(); ++c)
        out << c << ',' << dist.probs[c] << '\n';
    out.precision(old);
}

LossDistribution read_distribution_csv(std::istream& in, double t) {
    LossDistribution d{t, {}};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#' || line.rfind("count", 0) == 0)
            continue;
        std::istringstream row(line);
        std::size_t c = 0;
        char comma = 0;
        double p = 0.0;
        if (!(row >> c >> comma >> p) || comma != ',' || c != d.probs.size())
            throw InputError("distribution CSV line " + std::to_string(line_no) + ": malformed row");
        d.probs.push_back(p);
    }
    if (d.probs.empty())
        throw InputError("distribution CSV: no rows");
    return d;
}

void write_empirical_csv(std::ostream& out, const EmpiricalDistribution& emp) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    out << "count,frequency,std_err\n";
    for (std::size_t c = 0; c < emp.dist.probs.size(); ++c)
        out << c << ',' << emp.dist.probs[c] << ',' << emp.std_err[c] << '\n';
    out.precision(old);
}

json run_metadata(const EmpiricalDistribution& emp, const IntensitySchedule& schedule) {
    return {{"seed", emp.seed},
            {"n_paths", emp.n_paths},
            {"strategy", to_string(emp.strategy)},
            {"t", emp.dist.t},
            {"overflow_mass", emp.overflow},
            {"schedule_hash", schedule_hash(schedule)}};
}

namespace {

// Rows keyed by instrument name, columns by maturity; null where not quoted.
json error_table(const CalibrationProblem& problem, const std::vector<double>& errors) {
    std::vector<std::string> rows;
    for (const auto& inst : problem.instruments())
        if (std::find(rows.begin(), rows.end(), inst.name()) == rows.end())
            rows.push_back(inst.name());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        // index first, then by attachment
        if (a == "index" || b == "index")
            return a == "index" && b != "index";
        return std::stod(a) < std::stod(b);
    });
    const auto& dates = problem.maturity_dates();
    json table = json::array();
    for (const auto& name : rows) {
        json cells = json::array();
        for (std::size_t k = 0; k < dates.size(); ++k) {
            json cell = nullptr;
            for (std::size_t i = 0; i < problem.instruments().size(); ++i) {
                const auto& inst = problem.instruments()[i];
                if (inst.name() == name && inst.maturity == dates[k])
                    cell = errors[i];
            }
            cells.push_back(cell);
        }
        table.push_back({{"instrument", name}, {"errors", cells}});
    }
    return table;
}

json maturity_labels(const CalibrationProblem& problem) {
    json labels = json::array();
    for (const auto d : problem.maturity_dates())
        labels.push_back(format_date(d));
    return labels;
}

} // namespace

json calibration_json(const CalibrationResult& result, const CalibrationProblem& problem) {
    json j;
    j["model"] = to_string(result.schedule.model());
    j["pool_size"] = problem.pool().size;
    j["recovery"] = problem.pool().recovery;
    j["valuation_date"] = format_date(problem.panel().valuation_date);
    j["maturities"] = maturity_labels(problem);
    j["schedule"] = to_json(result.schedule);

    json params = json::array();
    for (std::size_t r = 0; r < result.schedule.modes(); ++r)
        params.push_back({{"amplitude", result.schedule.amplitudes()[r]}, {"cumulated", result.schedule.table()[r]}});
    j["parameters"] = params;
    j["epsilon"] = error_table(problem, result.value.errors);
    j["objective"] = result.value.f;
    json per_maturity = json::array();
    for (const double t : problem.knots())
        per_maturity.push_back(objective_at_maturity(result.value, problem, t));
    j["objective_by_maturity"] = per_maturity;

    json steps = json::array();
    for (const auto& s : result.log) {
        json cands = json::array();
        for (const auto& c : s.candidates)
            cands.push_back({c.amplitude, c.f});
        steps.push_back({{"amplitude", s.amplitude}, {"objective", s.f}, {"candidates", cands}});
    }
    j["iterations"] = steps;
    j["budget_warning"] = result.budget_warning;
    const auto& o = result.options;
    j["seed"] = o.seed;
    j["settings"] = {{"max_modes", o.max_modes},
                     {"f_threshold", o.f_threshold},
                     {"negligible", o.negligible},
                     {"candidate_budget", o.candidate_budget},
                     {"refine_budget", o.refine_budget},
                     {"grid_step_years", problem.grid_step()}};
    return j;
}

json pricing_report(const CalibrationProblem& problem, const ObjectiveValue& value) {
    json rows = json::array();
    const auto& insts = problem.instruments();
    for (std::size_t i = 0; i < insts.size(); ++i) {
        const auto& inst = insts[i];
        rows.push_back({{"instrument", inst.name()},
                        {"maturity", format_date(inst.maturity)},
                        {"is_upfront", inst.convention == QuoteConvention::upfront},
                        {"model_value", value.model_values[i] * 1e4},
                        {"market_mid", inst.mid * 1e4},
                        {"bid_ask_width", inst.width * 1e4},
                        {"epsilon", value.errors[i]}});
    }
    return {{"units", "bp"}, {"instruments", rows}, {"objective", value.f}};
}

} // namespace gpcl

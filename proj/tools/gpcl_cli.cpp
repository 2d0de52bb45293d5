#include "gpcl/cli.hpp"
#include "gpcl/error.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace gpcl;

    CLI::App app{"Generalized Poisson cluster loss models: loss distributions, pricing and calibration"};
    app.require_subcommand(1);

    RunConfig config;
    std::string model = "gpcl";
    std::string times;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--model", model, "Model kind")->check(CLI::IsMember({"gpl", "gpcl"}));
        sub->add_option("--curve", config.curve_path, "Discount curve CSV (date,zero_rate)");
        sub->add_option("--quotes", config.quotes_path, "Quote panel CSV");
        sub->add_option("--schedule", config.schedule_path, "Intensity schedule JSON");
        sub->add_option("--valuation-date", config.valuation_date, "Valuation date DD-Mon-YY");
        sub->add_option("--pool-size", config.pool.size, "Number of names");
        sub->add_option("--recovery", config.pool.recovery, "Recovery rate");
        sub->add_option("--grid-step", config.grid_step_days, "Default-leg grid step in days");
        sub->add_option("--paths", config.paths, "Monte Carlo paths");
        sub->add_option("--seed", config.seed, "Random seed");
        sub->add_option("--times", times, "Comma separated times in years");
        sub->add_option("--out", config.out_dir, "Output directory");
        sub->add_flag("--strict", config.strict, "Treat optimizer warnings as failures");
    };

    auto* calibrate = app.add_subcommand("calibrate", "Greedy joint calibration to a quote panel");
    add_common(calibrate);
    calibrate->add_option("--max-modes", config.max_modes, "Maximum number of jump amplitudes");
    calibrate->add_option("--candidate-budget", config.candidate_budget, "Evaluations per candidate amplitude");
    calibrate->add_option("--refine-budget", config.refine_budget, "Evaluations for refining the chosen amplitude");

    auto* dist = app.add_subcommand("dist", "Loss distributions at the requested times");
    add_common(dist);
    dist->add_flag("--simulate", config.simulate, "Add Monte Carlo frequencies and standard errors");

    auto* curve = app.add_subcommand("intensity-curve", "Counting intensity ratio h(c)/h(0) per strategy");
    add_common(curve);

    auto* price = app.add_subcommand("price", "Price a quote panel with a given schedule");
    add_common(price);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    config.command = app.get_subcommands().front()->get_name();
    try {
        config.model = parse_model_kind(model);
        config.times = parse_times(times);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return run_command(config, std::cout, std::cerr);
}

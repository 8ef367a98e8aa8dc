#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nvllc/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Wear-out simulator and lifetime forecaster for non-volatile last-level caches"};
    app.require_subcommand(1);

    std::string config_path;
    nvllc::CommandOptions opts;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment configuration (INI)");
        sub->add_option("--out", opts.out, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "override endurance and trace seeds");
        sub->add_flag("--quiet", opts.quiet, "suppress progress output");
    };
    auto* simulate = app.add_subcommand("simulate", "exact per-write degradation run");
    auto* forecast = app.add_subcommand("forecast", "epoch simulation-prediction forecast");
    auto* compare = app.add_subcommand("compare", "time-to-stop ratios across disabling policies");
    auto* gentrace = app.add_subcommand("gentrace", "write the configured synthetic trace");
    for (auto* s : {simulate, forecast, compare, gentrace}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : nvllc::kExitValidation;
    }

    nvllc::ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = nvllc::load_config(config_path);
        else cfg.validate();
        for (auto* s : {simulate, forecast, compare, gentrace})
            if (s->count("--seed")) opts.seed = seed;
    } catch (const nvllc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return nvllc::kExitValidation;
    }

    try {
        if (*simulate) return nvllc::cmd_simulate(cfg, opts);
        if (*forecast) return nvllc::cmd_forecast(cfg, opts);
        if (*compare) return nvllc::cmd_compare(cfg, opts);
        if (*gentrace) return nvllc::cmd_gentrace(cfg, opts);
    } catch (const nvllc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return nvllc::kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return nvllc::kExitRuntime;
    }
    return nvllc::kExitRuntime;
}

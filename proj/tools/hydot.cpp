#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hydot/config.hpp"
#include "hydot/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hyperspectral diffuse optical tomography toolkit"};
    app.require_subcommand(1);

    std::string run_path, validate_path;
    CLI::App* run_cmd = app.add_subcommand("run", "execute an experiment");
    run_cmd->add_option("config", run_path, "configuration file")->required();
    CLI::App* defaults_cmd =
        app.add_subcommand("defaults", "print the default configuration");
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "check a configuration file");
    validate_cmd->add_option("config", validate_path, "configuration file")
        ->required();

    CLI11_PARSE(app, argc, argv);

    if (defaults_cmd->parsed()) {
        std::cout << hydot::config::defaults_text();
        return 0;
    }

    const std::string path = run_cmd->parsed() ? run_path : validate_path;
    std::vector<std::string> errors;
    hydot::config::ExperimentConfig cfg =
        hydot::config::parse_config(path, errors);
    for (const auto& e : hydot::config::validate(cfg)) errors.push_back(e);
    if (!errors.empty()) {
        for (const auto& e : errors) std::cerr << "config error: " << e << "\n";
        return 2;
    }
    if (validate_cmd->parsed()) {
        std::cout << "config ok: " << path << "\n";
        return 0;
    }

    hydot::config::apply_env_overrides(cfg);
    try {
        int rc = hydot::experiments::run(cfg);
        if (rc == 0)
            std::cout << "done: outputs in " << cfg.outdir << "\n";
        else
            std::cerr << "experiment did not converge; partial outputs in "
                      << cfg.outdir << "\n";
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dlsim/bench.hpp"
#include "dlsim/cli.hpp"
#include "dlsim/config.hpp"
#include "dlsim/errors.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::string item;
    std::stringstream stream(text);
    while (std::getline(stream, item, ',')) {
        const auto begin = item.find_first_not_of(" \t");
        const auto end = item.find_last_not_of(" \t");
        if (begin == std::string::npos) {
            throw dlsim::ConfigError("--seeds: empty entry in '" + text + "'");
        }
        item = item.substr(begin, end - begin + 1);
        try {
            std::size_t consumed = 0;
            const unsigned long long value = std::stoull(item, &consumed);
            if (consumed != item.size()) {
                throw std::invalid_argument(item);
            }
            seeds.push_back(value);
        } catch (const std::exception&) {
            throw dlsim::ConfigError("--seeds: expected an unsigned integer, got '" +
                                     item + "'");
        }
    }
    if (seeds.empty()) {
        throw dlsim::ConfigError("--seeds: list must not be empty");
    }
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dlsim: data-lifecycle simulator for selective labeling strategies"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may appear after the subcommand

    std::string config_path;
    std::string out_dir;
    std::string seeds_text;
    app.add_option("--config", config_path, "configuration file (key = value lines)");
    app.add_option("--out", out_dir, "output directory (overrides output_dir)");
    app.add_option("--seeds", seeds_text, "comma-separated seed list (overrides seeds)");

    CLI::App* fit = app.add_subcommand("fit", "train the base model and its posterior");

    std::string strategy_text;
    double budget = -1.0;
    CLI::App* run = app.add_subcommand("run", "run the lifecycle for one strategy");
    run->add_option("--strategy", strategy_text,
                    "naive_false, naive_true, random, scod, or diverse")
        ->required();
    run->add_option("--budget", budget, "per-batch labeling budget fraction in [0, 1]");

    CLI::App* sweep = app.add_subcommand("sweep", "strategy x budget improvement grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& help) {
        return app.exit(help);  // prints help, exits 0
    } catch (const CLI::ParseError& error) {
        std::cerr << "error: " << error.what() << '\n';
        return 1;
    }

    try {
        dlsim::cli::RunConfig config;
        if (!config_path.empty()) {
            config = dlsim::cli::parse_config_file(config_path);
        }
        if (!out_dir.empty()) {
            config.output_dir = out_dir;
        }
        if (!seeds_text.empty()) {
            config.seeds = parse_seed_list(seeds_text);
        }
        if (budget >= 0.0) {
            config.budget_fraction = budget;
        }
        config.validate();

        if (fit->parsed()) {
            dlsim::cli::cmd_fit(config);
        } else if (run->parsed()) {
            dlsim::cli::cmd_run(config, dlsim::bench::parse_strategy(strategy_text));
        } else if (sweep->parsed()) {
            dlsim::cli::cmd_sweep(config);
        }
        return 0;
    } catch (const dlsim::ConfigError& error) {
        std::cerr << "configuration error: " << error.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& error) {
        std::cerr << "configuration error: " << error.what() << '\n';
        return 1;
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << '\n';
        return 2;
    }
}

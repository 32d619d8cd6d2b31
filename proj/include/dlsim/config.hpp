#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dlsim/bench.hpp"
#include "dlsim/datagen.hpp"
#include "dlsim/errors.hpp"
#include "dlsim/nnet.hpp"
#include "dlsim/uq.hpp"

namespace dlsim::cli {

/// Every knob of the simulator with its default.  Parsed from flat
/// "key = value" files; see parse_config for the grammar.
struct RunConfig {
    // Deployed model architecture.
    std::vector<int> hidden_widths = {16, 16};
    std::string activation = "tanh";
    double output_noise_sigma = 0.1;

    // Ground truth and base training.
    int input_dim = 16;
    int output_dim = 2;
    std::uint64_t teacher_seed = 0;
    int train_samples = 300;
    double train_noise_sigma = 0.01;
    int base_epochs = 2000;
    double base_lr = 0.001;
    std::uint64_t base_seed = 0;

    // Posterior fit.
    int posterior_rank = 40;
    double prior_scale = 1.0;
    std::string posterior_mode = "exact";

    // Stream.
    int num_batches = 100;
    int batch_size = 20;
    double regime_mix_nominal = 1.0 / 3.0;
    double regime_mix_shifted = 1.0 / 3.0;
    double regime_mix_corrupted = 1.0 / 3.0;
    double degradation_max = 0.1;

    // Lifecycle.
    double budget_fraction = 0.5;
    int retrain_epochs = 200;
    double retrain_lr = 0.001;
    bool posterior_refit = true;

    // Run control.
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<double> sweep_budgets_pct = {5,  10, 15, 20, 25, 30, 35, 40,
                                             45, 50, 55, 60, 65, 70, 75};
    std::string output_dir = "out";

    /// Cross-field validation; throws ConfigError with the offending key.
    void validate() const;

    // Assembled views used by the pipeline.
    nnet::Architecture architecture() const;
    datagen::StreamConfig stream_config(std::uint64_t seed) const;
    uq::FitConfig fit_config() const;
    bench::LifecycleConfig lifecycle_config(std::uint64_t seed) const;
};

/// Parses a flat key = value file.  Blank lines and lines starting with '#'
/// are skipped; inline "  # comment" tails are stripped.  Unknown keys,
/// duplicate keys, and unparsable values raise ConfigError naming the line.
/// Keys not present keep their defaults.  List values (seeds,
/// sweep_budgets_pct, hidden_widths) are comma-separated.
RunConfig parse_config(std::istream& in, const std::string& source_name);
RunConfig parse_config_file(const std::string& path);

/// All keys with their current values, in the exact spelling parse_config
/// accepts.  Sorted by key.
std::map<std::string, std::string> config_key_values(const RunConfig& config);

/// Writes the fully-resolved configuration as a reloadable key = value file.
void write_manifest(std::ostream& out, const RunConfig& config);

}  // namespace dlsim::cli

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlsim/bench.hpp"
#include "dlsim/config.hpp"
#include "dlsim/nnet.hpp"
#include "dlsim/uq.hpp"

namespace dlsim::cli {

/// Binary model serialization (fixed little-endian layout):
///   u64 layer_count, i64[layer_count] widths, u64 activation code,
///   f64 output_noise_sigma, f64[param_count] weights.
/// Round trip is bit-exact.  Loading throws ArtifactError on missing files,
/// truncation, or shape mismatches.
void save_model(const nnet::Architecture& arch, const nnet::WeightVector& weights,
                const std::string& path);
void load_model(const std::string& path, nnet::Architecture& arch,
                nnet::WeightVector& weights);

/// Standard artifact names inside an output directory.
std::string model_path(const std::string& dir);
std::string posterior_path(const std::string& dir);

/// `dlsim fit`: trains the base model on the synthetic training set, fits
/// its posterior, and writes model.bin, posterior.bin and fit_manifest.txt
/// into the output directory.  Returns the trained context pieces so tests
/// can compare the in-memory pipeline with the file round trip.
struct FitOutcome {
    nnet::WeightVector weights;
    uq::LowRankPosterior posterior;
    double train_loss = 0.0;
};
FitOutcome cmd_fit(const RunConfig& config);

/// Builds the lifecycle context for one stream seed, loading the model and
/// posterior from the output directory (they must exist; run `fit` first).
bench::LifecycleContext load_context(const RunConfig& config, std::uint64_t seed);

/// `dlsim run`: one strategy at a fixed budget across all configured seeds.
/// Writes report_<strategy>_<seed>.csv per seed plus run_summary.csv
/// (median and interquartile range over seeds) and run_manifest.txt.
struct RunOutcome {
    std::vector<bench::LifecycleReport> reports;  // one per seed
    double median_mean_loss = 0.0;
    double iqr_mean_loss = 0.0;
};
RunOutcome cmd_run(const RunConfig& config, bench::Strategy strategy);

/// `dlsim sweep`: full strategy x budget grid per seed.  Writes
/// sweep_<seed>.csv per seed, the seed-aggregated sweep_summary.csv
/// (median improvement and cost per cell), and sweep_manifest.txt.
/// Returns the aggregated rows and prints them as an aligned table.
std::vector<bench::SweepRow> cmd_sweep(const RunConfig& config);

}  // namespace dlsim::cli

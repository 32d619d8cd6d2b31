#include "dlsim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <utility>

#include "binary_io.hpp"
#include "dlsim/rng.hpp"

namespace dlsim::cli {

namespace {

// Sub-seed tags for the base-fit pipeline.
constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kBaseTrainTag = 0xBA5E;

constexpr std::uint64_t kActivationTanh = 0;
constexpr std::uint64_t kActivationRelu = 1;

void ensure_output_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw ArtifactError("cannot create output directory '" + dir +
                            "': " + ec.message());
    }
}

std::ofstream open_text(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ArtifactError("cannot open '" + path + "' for writing");
    }
    return out;
}

double interquartile_range(std::vector<double> values) {
    // Quartiles via the median-of-halves rule; robust enough for the small
    // seed counts used here.
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n < 2) {
        return 0.0;
    }
    const std::size_t half = n / 2;
    const std::vector<double> lower(values.begin(), values.begin() + half);
    const std::vector<double> upper(values.begin() + (n - half), values.end());
    return bench::median(upper) - bench::median(lower);
}

std::string seed_file_tag(std::uint64_t seed) {
    return "seed" + std::to_string(seed);
}

void write_config_manifest(const std::string& path, const RunConfig& config,
                           const std::string& invocation) {
    std::ofstream out = open_text(path);
    out << "# invoked as: " << invocation << '\n';
    write_manifest(out, config);
    if (!out) {
        throw ArtifactError("failed to write '" + path + "'");
    }
}

}  // namespace

std::string model_path(const std::string& dir) { return dir + "/model.bin"; }

std::string posterior_path(const std::string& dir) { return dir + "/posterior.bin"; }

void save_model(const nnet::Architecture& arch, const nnet::WeightVector& weights,
                const std::string& path) {
    arch.validate();
    if (weights.size() != arch.param_count()) {
        throw DimensionError("weight vector does not match architecture");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ArtifactError("cannot open '" + path + "' for writing");
    }
    detail::write_u64(out, arch.layer_widths.size());
    for (int width : arch.layer_widths) {
        detail::write_i64(out, width);
    }
    detail::write_u64(out, arch.activation == nnet::Activation::kTanh
                               ? kActivationTanh
                               : kActivationRelu);
    detail::write_f64(out, arch.output_noise_sigma);
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        detail::write_f64(out, weights[i]);
    }
    if (!out) {
        throw ArtifactError("failed to write model to '" + path + "'");
    }
}

void load_model(const std::string& path, nnet::Architecture& arch,
                nnet::WeightVector& weights) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArtifactError("cannot open model file '" + path +
                            "'; run `dlsim fit` first");
    }
    const std::uint64_t layer_count = detail::read_u64(in, path);
    if (layer_count < 2 || layer_count > 64) {
        throw ArtifactError(path + ": implausible layer count");
    }
    nnet::Architecture loaded;
    for (std::uint64_t i = 0; i < layer_count; ++i) {
        const std::int64_t width = detail::read_i64(in, path);
        if (width < 1 || width > (1 << 20)) {
            throw ArtifactError(path + ": implausible layer width");
        }
        loaded.layer_widths.push_back(static_cast<int>(width));
    }
    const std::uint64_t activation_code = detail::read_u64(in, path);
    if (activation_code != kActivationTanh && activation_code != kActivationRelu) {
        throw ArtifactError(path + ": unknown activation code");
    }
    loaded.activation = activation_code == kActivationTanh ? nnet::Activation::kTanh
                                                           : nnet::Activation::kRelu;
    loaded.output_noise_sigma = detail::read_f64(in, path);

    try {
        loaded.validate();
    } catch (const std::exception& error) {
        throw ArtifactError(path + ": " + error.what());
    }

    nnet::WeightVector loaded_weights(loaded.param_count());
    for (Eigen::Index i = 0; i < loaded_weights.size(); ++i) {
        loaded_weights[i] = detail::read_f64(in, path);
    }
    if (!loaded_weights.allFinite()) {
        throw ArtifactError(path + ": model weights contain non-finite values");
    }

    arch = std::move(loaded);
    weights = std::move(loaded_weights);
}

FitOutcome cmd_fit(const RunConfig& config) {
    config.validate();
    const nnet::Architecture arch = config.architecture();
    const datagen::Teacher teacher =
        datagen::make_teacher(config.input_dim, config.output_dim, config.teacher_seed);
    const std::vector<nnet::LabeledExample> data = datagen::training_set(
        teacher, config.train_samples, config.train_noise_sigma, config.base_seed);

    const nnet::WeightVector initial =
        nnet::init_weights(arch, derive_seed(config.base_seed, kInitTag));
    const nnet::TrainResult trained =
        nnet::train(arch, initial, data, config.base_epochs, config.base_lr,
                    derive_seed(config.base_seed, kBaseTrainTag));

    FitOutcome outcome;
    outcome.weights = trained.weights;
    outcome.train_loss = trained.final_loss;
    outcome.posterior =
        uq::fit_posterior(arch, trained.weights, data, config.fit_config());

    ensure_output_dir(config.output_dir);
    save_model(arch, trained.weights, model_path(config.output_dir));
    uq::save_posterior(outcome.posterior, posterior_path(config.output_dir));
    write_config_manifest(config.output_dir + "/fit_manifest.txt", config, "dlsim fit");

    std::cout << "fit: " << data.size() << " examples, train loss "
              << bench::format_double(trained.initial_loss) << " -> "
              << bench::format_double(trained.final_loss) << ", posterior rank "
              << outcome.posterior.rank() << " written to " << config.output_dir
              << '\n';
    return outcome;
}

bench::LifecycleContext load_context(const RunConfig& config, std::uint64_t seed) {
    config.validate();

    bench::LifecycleContext context;
    load_model(model_path(config.output_dir), context.arch, context.weights);

    const nnet::Architecture expected = config.architecture();
    if (context.arch.layer_widths != expected.layer_widths ||
        context.arch.activation != expected.activation ||
        context.arch.output_noise_sigma != expected.output_noise_sigma) {
        throw ArtifactError(model_path(config.output_dir) +
                            ": stored architecture does not match the configuration; "
                            "re-run `dlsim fit`");
    }

    context.posterior = uq::load_posterior(posterior_path(config.output_dir));
    if (context.posterior.dim() != context.arch.param_count()) {
        throw ArtifactError(posterior_path(config.output_dir) +
                            ": posterior dimension does not match the model; "
                            "re-run `dlsim fit`");
    }

    context.teacher =
        datagen::make_teacher(config.input_dim, config.output_dim, config.teacher_seed);
    context.training_data = datagen::training_set(
        context.teacher, config.train_samples, config.train_noise_sigma,
        config.base_seed);
    context.stream = config.stream_config(seed);
    context.fit = config.fit_config();
    return context;
}

RunOutcome cmd_run(const RunConfig& config, bench::Strategy strategy) {
    config.validate();
    ensure_output_dir(config.output_dir);

    const std::string budget_tag =
        "b" + bench::format_double(100.0 * config.budget_fraction);
    RunOutcome outcome;
    std::vector<double> losses;
    std::vector<double> costs;

    for (std::uint64_t seed : config.seeds) {
        const bench::LifecycleContext context = load_context(config, seed);
        const bench::LifecycleReport report =
            bench::run_lifecycle(context, strategy, config.lifecycle_config(seed));

        const std::string path = config.output_dir + "/report_" +
                                 bench::strategy_name(strategy) + "_" + budget_tag +
                                 "_" + seed_file_tag(seed) + ".csv";
        std::ofstream out = open_text(path);
        bench::write_report_csv(out, report);
        if (!out) {
            throw ArtifactError("failed to write '" + path + "'");
        }

        losses.push_back(report.lifetime_mean_loss());
        costs.push_back(report.cost_pct(config.batch_size));
        outcome.reports.push_back(report);
    }

    outcome.median_mean_loss = bench::median(losses);
    outcome.iqr_mean_loss = interquartile_range(losses);

    const std::string summary_path = config.output_dir + "/run_summary.csv";
    std::ofstream summary = open_text(summary_path);
    summary << "strategy,budget_pct,num_seeds,median_mean_loss,iqr_mean_loss,"
               "median_cost_pct\n";
    summary << bench::strategy_name(strategy) << ','
            << bench::format_double(100.0 * config.budget_fraction) << ','
            << config.seeds.size() << ','
            << bench::format_double(outcome.median_mean_loss) << ','
            << bench::format_double(outcome.iqr_mean_loss) << ','
            << bench::format_double(bench::median(costs)) << '\n';
    if (!summary) {
        throw ArtifactError("failed to write '" + summary_path + "'");
    }

    write_config_manifest(config.output_dir + "/run_manifest.txt", config,
                          "dlsim run --strategy " + bench::strategy_name(strategy));

    std::cout << "run: " << bench::strategy_name(strategy) << " at budget "
              << bench::format_double(100.0 * config.budget_fraction) << "%, "
              << config.seeds.size() << " seeds, median lifetime loss "
              << bench::format_double(outcome.median_mean_loss) << " (iqr "
              << bench::format_double(outcome.iqr_mean_loss) << ")\n";
    return outcome;
}

std::vector<bench::SweepRow> cmd_sweep(const RunConfig& config) {
    config.validate();
    ensure_output_dir(config.output_dir);

    std::vector<double> fractions;
    fractions.reserve(config.sweep_budgets_pct.size());
    for (double pct : config.sweep_budgets_pct) {
        fractions.push_back(pct / 100.0);
    }
    const std::vector<bench::Strategy> budgeted = {
        bench::Strategy::kRandom, bench::Strategy::kScod, bench::Strategy::kDiverse};

    // cell key -> per-seed values, keyed by (strategy name, budget_pct).
    std::map<std::pair<std::string, double>, std::vector<double>> improvements;
    std::map<std::pair<std::string, double>, std::vector<double>> costs;

    for (std::uint64_t seed : config.seeds) {
        const bench::LifecycleContext context = load_context(config, seed);
        const std::vector<bench::SweepRow> rows = bench::budget_sweep(
            context, config.lifecycle_config(seed), budgeted, fractions);

        const std::string path =
            config.output_dir + "/sweep_" + seed_file_tag(seed) + ".csv";
        std::ofstream out = open_text(path);
        bench::write_sweep_csv(out, rows);
        if (!out) {
            throw ArtifactError("failed to write '" + path + "'");
        }

        for (const bench::SweepRow& row : rows) {
            const auto key = std::make_pair(bench::strategy_name(row.strategy),
                                            row.budget_pct);
            improvements[key].push_back(row.improvement_pct);
            costs[key].push_back(row.cost_pct);
        }
    }

    std::vector<bench::SweepRow> summary_rows;
    for (const auto& [key, cell_improvements] : improvements) {
        bench::SweepRow row;
        row.strategy = bench::parse_strategy(key.first);
        row.budget_pct = key.second;
        row.cost_pct = bench::median(costs[key]);
        row.improvement_pct = bench::median(cell_improvements);
        summary_rows.push_back(row);
    }

    const std::string summary_path = config.output_dir + "/sweep_summary.csv";
    std::ofstream summary = open_text(summary_path);
    bench::write_sweep_csv(summary, summary_rows);
    if (!summary) {
        throw ArtifactError("failed to write '" + summary_path + "'");
    }

    write_config_manifest(config.output_dir + "/sweep_manifest.txt", config,
                          "dlsim sweep");

    std::printf("%-12s %12s %12s %16s\n", "strategy", "budget_pct", "cost_pct",
                "improvement_pct");
    for (const bench::SweepRow& row : summary_rows) {
        std::printf("%-12s %12s %12s %16s\n",
                    bench::strategy_name(row.strategy).c_str(),
                    bench::format_double(row.budget_pct).c_str(),
                    bench::format_double(row.cost_pct).c_str(),
                    bench::format_double(row.improvement_pct).c_str());
    }
    return summary_rows;
}

}  // namespace dlsim::cli

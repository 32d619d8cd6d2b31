#include "dlsim/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>

#include "dlsim/rng.hpp"

namespace dlsim::bench {

namespace {

// Sub-seed tags for the independent random consumers of one lifecycle run.
constexpr std::uint64_t kFlagTag = 0xF1A6;
constexpr std::uint64_t kRetrainTag = 0x4E72;
constexpr std::uint64_t kSketchTag = 0x53E7;

/// Labels per batch a budgeted strategy may buy.
int batch_budget(double budget_fraction, int batch_size) {
    const int k = static_cast<int>(std::floor(budget_fraction * batch_size));
    return std::clamp(k, 0, batch_size);
}

select::SelectionResult flag_batch(const LifecycleContext& context,
                                   const nnet::WeightVector& weights,
                                   const uq::LowRankPosterior& posterior,
                                   const datagen::Batch& batch, Strategy strategy,
                                   const LifecycleConfig& config) {
    const int m = static_cast<int>(batch.inputs.rows());
    switch (strategy) {
        case Strategy::kNaiveFalse:
            return select::flag_naive(m, false);
        case Strategy::kNaiveTrue:
            return select::flag_naive(m, true);
        default:
            break;
    }

    const int k = batch_budget(config.budget_fraction, m);
    if (k == 0) {
        // Zero budget: every budgeted strategy degenerates to naive_false.
        return select::flag_naive(m, false);
    }
    if (strategy == Strategy::kRandom) {
        return select::flag_random(
            m, k,
            derive_seed(config.seed, kFlagTag,
                        static_cast<std::uint64_t>(batch.batch_index)));
    }

    // The informed strategies score each input by its belief update under
    // the current weights and posterior.
    std::vector<uq::BeliefUpdate> updates;
    updates.reserve(static_cast<std::size_t>(m));
    for (int row = 0; row < m; ++row) {
        updates.push_back(uq::belief_update(context.arch, weights,
                                            batch.inputs.row(row).transpose()));
    }
    if (strategy == Strategy::kScod) {
        std::vector<double> scores;
        scores.reserve(updates.size());
        for (const uq::BeliefUpdate& update : updates) {
            scores.push_back(uq::uncertainty(posterior, update));
        }
        return select::flag_scod_k(scores, k);
    }
    return select::flag_diverse(select::build_kernel(updates), k);
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::string strategy_name(Strategy strategy) {
    switch (strategy) {
        case Strategy::kNaiveFalse: return "naive_false";
        case Strategy::kNaiveTrue: return "naive_true";
        case Strategy::kRandom: return "random";
        case Strategy::kScod: return "scod";
        case Strategy::kDiverse: return "diverse";
    }
    throw ConfigError("unknown strategy");
}

Strategy parse_strategy(const std::string& name) {
    for (Strategy strategy : all_strategies()) {
        if (strategy_name(strategy) == name) {
            return strategy;
        }
    }
    throw ConfigError("unknown strategy '" + name +
                      "' (expected naive_false, naive_true, random, scod, or diverse)");
}

std::vector<Strategy> all_strategies() {
    return {Strategy::kNaiveFalse, Strategy::kNaiveTrue, Strategy::kRandom,
            Strategy::kScod, Strategy::kDiverse};
}

void LifecycleConfig::validate() const {
    if (!std::isfinite(budget_fraction) || budget_fraction < 0.0 ||
        budget_fraction > 1.0) {
        throw InvalidBudgetError("budget_fraction must lie in [0, 1]");
    }
    if (retrain_epochs < 0) {
        throw ConfigError("retrain_epochs must be non-negative");
    }
    if (!std::isfinite(retrain_lr) || retrain_lr <= 0.0) {
        throw ConfigError("retrain_lr must be a positive finite number");
    }
}

double LifecycleReport::lifetime_mean_loss() const {
    if (records.empty()) {
        throw DimensionError("report has no records");
    }
    double total = 0.0;
    for (const BatchRecord& record : records) {
        total += record.mean_loss;
    }
    return total / static_cast<double>(records.size());
}

std::int64_t LifecycleReport::total_cost() const {
    return records.empty() ? 0 : records.back().cumulative_cost;
}

double LifecycleReport::cost_pct(int batch_size) const {
    if (records.empty() || batch_size < 1) {
        return 0.0;
    }
    const double denominator =
        static_cast<double>(records.size()) * static_cast<double>(batch_size);
    return 100.0 * static_cast<double>(total_cost()) / denominator;
}

LifecycleReport run_lifecycle(const LifecycleContext& context, Strategy strategy,
                              const LifecycleConfig& config) {
    config.validate();
    context.stream.validate();
    context.arch.validate();

    LifecycleReport report;
    report.strategy = strategy;
    switch (strategy) {
        case Strategy::kNaiveFalse: report.budget_fraction = 0.0; break;
        case Strategy::kNaiveTrue: report.budget_fraction = 1.0; break;
        default: report.budget_fraction = config.budget_fraction; break;
    }
    report.records.reserve(static_cast<std::size_t>(context.stream.num_batches));

    nnet::WeightVector weights = context.weights;
    uq::LowRankPosterior posterior = context.posterior;
    std::vector<nnet::LabeledExample> purchased_history;
    std::int64_t cumulative_cost = 0;

    for (int b = 0; b < context.stream.num_batches; ++b) {
        const datagen::Batch batch =
            datagen::next_batch(context.stream, context.arch.input_dim(), b);
        const std::vector<nnet::LabeledExample> ground_truth =
            datagen::label_batch(context.teacher, batch);

        // Score the deployed model on the incoming batch before it can
        // adapt; the lifetime metric sums these pre-adaptation losses.
        const double loss = nnet::mean_loss(context.arch, weights, ground_truth);

        const select::SelectionResult selection =
            flag_batch(context, weights, posterior, batch, strategy, config);

        std::vector<nnet::LabeledExample> purchased;
        for (std::size_t i = 0; i < selection.flags.size(); ++i) {
            if (selection.flags[i]) {
                purchased.push_back(ground_truth[i]);
            }
        }
        cumulative_cost += static_cast<std::int64_t>(purchased.size());

        if (!purchased.empty()) {
            try {
                weights = nnet::train(context.arch, weights, purchased,
                                      config.retrain_epochs, config.retrain_lr,
                                      derive_seed(config.seed, kRetrainTag,
                                                  static_cast<std::uint64_t>(b)))
                              .weights;
            } catch (const TrainingDivergedError& error) {
                throw LifecycleError(static_cast<std::size_t>(b),
                                     "retraining diverged at batch " +
                                         std::to_string(b) + ": " + error.what());
            }
            purchased_history.insert(purchased_history.end(), purchased.begin(),
                                     purchased.end());
            if (config.posterior_refit) {
                std::vector<nnet::LabeledExample> refit_data = context.training_data;
                refit_data.insert(refit_data.end(), purchased_history.begin(),
                                  purchased_history.end());
                uq::FitConfig refit_config = context.fit;
                refit_config.sketch_seed = derive_seed(
                    context.fit.sketch_seed, kSketchTag, static_cast<std::uint64_t>(b));
                posterior =
                    uq::fit_posterior(context.arch, weights, refit_data, refit_config);
            }
        }

        report.records.push_back(BatchRecord{b, loss, selection.num_flagged(),
                                             cumulative_cost});
    }
    return report;
}

double normalized_improvement_pct(const LifecycleReport& report,
                                  const LifecycleReport& baseline_false,
                                  const LifecycleReport& baseline_true) {
    const double loss_false = baseline_false.lifetime_mean_loss();
    const double loss_true = baseline_true.lifetime_mean_loss();
    const double spread = loss_false - loss_true;
    if (std::abs(spread) < 1e-12) {
        throw DegenerateBaselineError(
            "baselines are indistinguishable; improvement is undefined");
    }
    // Dividing before scaling keeps the baselines exactly at 0 and 100.
    return 100.0 * ((loss_false - report.lifetime_mean_loss()) / spread);
}

std::vector<SweepRow> budget_sweep(const LifecycleContext& context,
                                   const LifecycleConfig& base_config,
                                   const std::vector<Strategy>& strategies,
                                   const std::vector<double>& budget_fractions) {
    for (double fraction : budget_fractions) {
        if (!std::isfinite(fraction) || fraction < 0.0 || fraction > 1.0) {
            throw InvalidBudgetError("sweep budgets must lie in [0, 1]");
        }
    }

    const LifecycleReport baseline_false =
        run_lifecycle(context, Strategy::kNaiveFalse, base_config);
    const LifecycleReport baseline_true =
        run_lifecycle(context, Strategy::kNaiveTrue, base_config);

    std::vector<SweepRow> rows;
    rows.push_back(SweepRow{Strategy::kNaiveFalse, 0.0, 0.0,
                            normalized_improvement_pct(baseline_false, baseline_false,
                                                       baseline_true)});
    rows.push_back(SweepRow{Strategy::kNaiveTrue, 100.0,
                            baseline_true.cost_pct(context.stream.batch_size),
                            normalized_improvement_pct(baseline_true, baseline_false,
                                                       baseline_true)});

    for (Strategy strategy : strategies) {
        if (strategy == Strategy::kNaiveFalse || strategy == Strategy::kNaiveTrue) {
            continue;  // Baselines already have their rows.
        }
        for (double fraction : budget_fractions) {
            LifecycleConfig cell_config = base_config;
            cell_config.budget_fraction = fraction;
            const LifecycleReport report = run_lifecycle(context, strategy, cell_config);
            rows.push_back(SweepRow{
                strategy, 100.0 * fraction,
                report.cost_pct(context.stream.batch_size),
                normalized_improvement_pct(report, baseline_false, baseline_true)});
        }
    }

    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        const std::string name_a = strategy_name(a.strategy);
        const std::string name_b = strategy_name(b.strategy);
        return name_a != name_b ? name_a < name_b : a.budget_pct < b.budget_pct;
    });
    return rows;
}

std::string format_double(double value) {
    // Shortest decimal form that parses back to the same bits, so CSV output
    // is both readable and exactly reproducible.  Scanning all precisions and
    // keeping the shortest string prefers "50" over the equally exact "5e+01".
    if (value == 0.0) {
        return "0";  // merge the two IEEE zeros; "-0" helps no reader
    }
    char buffer[64];
    std::string best;
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buffer, sizeof(buffer), "%.*g", precision, value);
        if (std::strtod(buffer, nullptr) == value &&
            (best.empty() || std::string(buffer).size() < best.size())) {
            best = buffer;
        }
    }
    return best;
}

double median(std::vector<double> values) {
    if (values.empty()) {
        throw DimensionError("median of empty list");
    }
    return median_of(std::move(values));
}

void write_report_csv(std::ostream& out, const LifecycleReport& report) {
    out << "batch_index,strategy,budget,mean_loss,num_flagged,cumulative_cost\n";
    const std::string name = strategy_name(report.strategy);
    const std::string budget = format_double(report.budget_fraction);
    for (const BatchRecord& record : report.records) {
        out << record.batch_index << ',' << name << ',' << budget << ','
            << format_double(record.mean_loss) << ',' << record.num_flagged << ','
            << record.cumulative_cost << '\n';
    }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "strategy,budget_pct,cost_pct,improvement_pct\n";
    for (const SweepRow& row : rows) {
        out << strategy_name(row.strategy) << ',' << format_double(row.budget_pct)
            << ',' << format_double(row.cost_pct) << ','
            << format_double(row.improvement_pct) << '\n';
    }
}

}  // namespace dlsim::bench

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dlsim/datagen.hpp"
#include "dlsim/errors.hpp"
#include "dlsim/nnet.hpp"
#include "dlsim/select.hpp"
#include "dlsim/uq.hpp"

namespace dlsim::bench {

/// The five flagging strategies under comparison.  naive_false / naive_true
/// are the free-riding and label-everything baselines that anchor the
/// improvement normalization; the other three spend a per-batch budget.
enum class Strategy { kNaiveFalse, kNaiveTrue, kRandom, kScod, kDiverse };

std::string strategy_name(Strategy strategy);
Strategy parse_strategy(const std::string& name);
std::vector<Strategy> all_strategies();

/// Per-run knobs of the flag -> label -> retrain loop.
struct LifecycleConfig {
    double budget_fraction = 0.5;  // share of each batch that may be labeled
    int retrain_epochs = 200;
    double retrain_lr = 0.001;
    bool posterior_refit = true;   // refit the posterior after each retrain
    std::uint64_t seed = 0;        // drives random flagging + retrain shuffles

    /// Throws InvalidBudgetError if budget_fraction is outside [0, 1] and
    /// ConfigError for bad retrain settings.
    void validate() const;
};

/// Everything a lifecycle run consumes: the deployed model, its posterior,
/// the data it was trained on (needed for posterior refits), the label
/// oracle, and the stream definition.  Runs never mutate the context, so
/// one context can serve many strategy/budget/seed combinations.
struct LifecycleContext {
    nnet::Architecture arch;
    nnet::WeightVector weights;
    uq::LowRankPosterior posterior;
    std::vector<nnet::LabeledExample> training_data;
    datagen::Teacher teacher;
    datagen::StreamConfig stream;
    uq::FitConfig fit;
};

/// One row of a lifecycle report: state of the run as batch `batch_index`
/// arrived.  `mean_loss` is measured before any retraining that batch
/// triggers; `cumulative_cost` counts all labels purchased up to and
/// including this batch.
struct BatchRecord {
    int batch_index = 0;
    double mean_loss = 0.0;
    int num_flagged = 0;
    std::int64_t cumulative_cost = 0;
};

/// Full trajectory of one lifecycle run.
struct LifecycleReport {
    Strategy strategy = Strategy::kNaiveFalse;
    double budget_fraction = 0.0;
    std::vector<BatchRecord> records;

    /// Mean of mean_loss over all batches (lifetime performance, negated).
    double lifetime_mean_loss() const;

    /// Total labels purchased.
    std::int64_t total_cost() const;

    /// Total cost as a percentage of labeling everything.
    double cost_pct(int batch_size) const;
};

/// Runs the episodic loop: for each stream batch, record the current mean
/// loss, flag inputs with `strategy`, buy oracle labels for the flags,
/// retrain on them, and (when configured) refit the posterior on the
/// training data plus everything labeled so far.  Throws LifecycleError
/// (with the batch index) if retraining diverges.
LifecycleReport run_lifecycle(const LifecycleContext& context, Strategy strategy,
                              const LifecycleConfig& config);

/// Maps a run's lifetime mean loss onto the [naive_false, naive_true] axis:
/// 0% means no better than never labeling, 100% means as good as labeling
/// everything.  Can exceed 100 or go negative.  Throws
/// DegenerateBaselineError when the two baselines are within 1e-12 of each
/// other.
double normalized_improvement_pct(const LifecycleReport& report,
                                  const LifecycleReport& baseline_false,
                                  const LifecycleReport& baseline_true);

/// One cell of a budget sweep.
struct SweepRow {
    Strategy strategy = Strategy::kNaiveFalse;
    double budget_pct = 0.0;
    double cost_pct = 0.0;
    double improvement_pct = 0.0;
};

/// Runs every (strategy, budget) combination plus the two baselines and
/// normalizes each cell against those baselines.  Baseline rows appear at
/// budget 0 and 100 with improvement 0 and 100 by construction.  Rows are
/// ordered by strategy name, then budget.
std::vector<SweepRow> budget_sweep(const LifecycleContext& context,
                                   const LifecycleConfig& base_config,
                                   const std::vector<Strategy>& strategies,
                                   const std::vector<double>& budget_fractions);

/// CSV writers.  Columns are fixed:
///   report: batch_index,strategy,budget,mean_loss,num_flagged,cumulative_cost
///   sweep:  strategy,budget_pct,cost_pct,improvement_pct
void write_report_csv(std::ostream& out, const LifecycleReport& report);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Shortest decimal form that round-trips a double (used by every CSV writer
/// so identical runs produce byte-identical files).
std::string format_double(double value);

/// Median of a non-empty list (mean of the middle pair for even sizes).
double median(std::vector<double> values);

}  // namespace dlsim::bench

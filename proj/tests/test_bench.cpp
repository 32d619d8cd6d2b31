#include <doctest.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "dlsim/bench.hpp"
#include "dlsim/datagen.hpp"
#include "dlsim/nnet.hpp"
#include "dlsim/rng.hpp"
#include "dlsim/uq.hpp"

using namespace dlsim;

namespace {

/// Small but complete deployment: trained student, posterior, stream.
bench::LifecycleContext make_context(std::uint64_t stream_seed = 5) {
    bench::LifecycleContext context;
    context.arch.layer_widths = {4, 8, 2};
    context.arch.activation = nnet::Activation::kTanh;
    context.arch.output_noise_sigma = 0.1;

    context.teacher = datagen::make_teacher(4, 2, 11);
    context.training_data = datagen::training_set(context.teacher, 60, 0.02, 1);
    context.weights = nnet::train(context.arch,
                                  nnet::init_weights(context.arch, 2),
                                  context.training_data, 300, 0.001, 3)
                          .weights;

    context.fit.rank = 12;
    context.fit.epsilon = 1.0;
    context.fit.mode = uq::FitMode::kExact;
    context.posterior = uq::fit_posterior(context.arch, context.weights,
                                          context.training_data, context.fit);

    context.stream.num_batches = 6;
    context.stream.batch_size = 5;
    context.stream.seed = stream_seed;
    return context;
}

bench::LifecycleConfig make_config(double budget = 0.5, std::uint64_t seed = 0) {
    bench::LifecycleConfig config;
    config.budget_fraction = budget;
    config.retrain_epochs = 40;
    config.retrain_lr = 0.001;
    config.posterior_refit = true;
    config.seed = seed;
    return config;
}

std::string report_string(const bench::LifecycleReport& report) {
    std::ostringstream out;
    bench::write_report_csv(out, report);
    return out.str();
}

bench::LifecycleReport fake_report(bench::Strategy strategy,
                                   std::vector<double> losses) {
    bench::LifecycleReport report;
    report.strategy = strategy;
    std::int64_t cost = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        cost += 3;
        report.records.push_back(bench::BatchRecord{
            static_cast<int>(i), losses[i], 3, cost});
    }
    return report;
}

}  // namespace

TEST_CASE("strategy names round-trip and reject unknowns") {
    for (bench::Strategy strategy : bench::all_strategies()) {
        CHECK(bench::parse_strategy(bench::strategy_name(strategy)) == strategy);
    }
    CHECK_THROWS_AS(bench::parse_strategy("greedy"), ConfigError);
}

TEST_CASE("naive_false is a pure evaluation pass") {
    const bench::LifecycleContext context = make_context();
    const bench::LifecycleReport report =
        bench::run_lifecycle(context, bench::Strategy::kNaiveFalse, make_config());

    REQUIRE(report.records.size() == 6);
    CHECK(report.budget_fraction == 0.0);
    for (int b = 0; b < 6; ++b) {
        const bench::BatchRecord& record = report.records[static_cast<std::size_t>(b)];
        CHECK(record.batch_index == b);
        CHECK(record.num_flagged == 0);
        CHECK(record.cumulative_cost == 0);

        // The never-flagging run must score exactly like the untouched model.
        const double expected = nnet::mean_loss(
            context.arch, context.weights,
            datagen::label_batch(context.teacher,
                                 datagen::next_batch(context.stream, 4, b)));
        CHECK(record.mean_loss == expected);
    }
    CHECK(report.total_cost() == 0);
    CHECK(report.cost_pct(5) == 0.0);
}

TEST_CASE("naive_true labels every input and pays full cost") {
    const bench::LifecycleContext context = make_context();
    const bench::LifecycleReport report =
        bench::run_lifecycle(context, bench::Strategy::kNaiveTrue, make_config());

    CHECK(report.budget_fraction == 1.0);
    for (int b = 0; b < 6; ++b) {
        CHECK(report.records[static_cast<std::size_t>(b)].num_flagged == 5);
        CHECK(report.records[static_cast<std::size_t>(b)].cumulative_cost ==
              5 * (b + 1));
    }
    CHECK(report.cost_pct(5) == 100.0);
}

TEST_CASE("budgeted strategies buy floor(budget * batch_size) labels") {
    const bench::LifecycleContext context = make_context();
    for (bench::Strategy strategy :
         {bench::Strategy::kRandom, bench::Strategy::kScod,
          bench::Strategy::kDiverse}) {
        // floor(0.5 * 5) = 2 labels per batch at most.
        const bench::LifecycleReport report =
            bench::run_lifecycle(context, strategy, make_config(0.5));
        for (const bench::BatchRecord& record : report.records) {
            CHECK(record.num_flagged <= 2);
            if (strategy != bench::Strategy::kDiverse) {
                CHECK(record.num_flagged == 2);
            }
        }
    }
}

TEST_CASE("zero budget reduces every strategy to naive_false") {
    const bench::LifecycleContext context = make_context();
    const bench::LifecycleReport baseline =
        bench::run_lifecycle(context, bench::Strategy::kNaiveFalse, make_config(0.0));
    for (bench::Strategy strategy :
         {bench::Strategy::kRandom, bench::Strategy::kScod,
          bench::Strategy::kDiverse}) {
        const bench::LifecycleReport report =
            bench::run_lifecycle(context, strategy, make_config(0.0));
        CHECK(report.total_cost() == 0);
        // Same trajectory, only the strategy and budget columns differ.
        REQUIRE(report.records.size() == baseline.records.size());
        for (std::size_t b = 0; b < report.records.size(); ++b) {
            CHECK(report.records[b].mean_loss == baseline.records[b].mean_loss);
            CHECK(report.records[b].num_flagged == 0);
        }
    }
}

TEST_CASE("the first batch is scored before any adaptation") {
    const bench::LifecycleContext context = make_context();
    const bench::LifecycleConfig config = make_config();
    const double reference =
        bench::run_lifecycle(context, bench::Strategy::kNaiveFalse, config)
            .records[0]
            .mean_loss;
    for (bench::Strategy strategy : bench::all_strategies()) {
        CHECK(bench::run_lifecycle(context, strategy, config).records[0].mean_loss ==
              reference);
    }
}

TEST_CASE("lifecycle runs are reproducible and leave the context untouched") {
    const bench::LifecycleContext context = make_context();
    const nnet::WeightVector weights_before = context.weights;

    const std::string first = report_string(
        bench::run_lifecycle(context, bench::Strategy::kRandom, make_config(0.6, 9)));
    const std::string second = report_string(
        bench::run_lifecycle(context, bench::Strategy::kRandom, make_config(0.6, 9)));
    const std::string reseeded = report_string(
        bench::run_lifecycle(context, bench::Strategy::kRandom, make_config(0.6, 10)));

    CHECK(first == second);
    CHECK(first != reseeded);
    CHECK((context.weights - weights_before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("report CSV follows the documented schema") {
    const bench::LifecycleContext context = make_context();
    const bench::LifecycleReport report =
        bench::run_lifecycle(context, bench::Strategy::kScod, make_config(0.4));

    std::istringstream in(report_string(report));
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "batch_index,strategy,budget,mean_loss,num_flagged,cumulative_cost");

    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream fields(line);
        std::string field;
        std::vector<std::string> parsed;
        while (std::getline(fields, field, ',')) {
            parsed.push_back(field);
        }
        REQUIRE(parsed.size() == 6);
        CHECK(std::stoi(parsed[0]) == rows);
        CHECK(parsed[1] == "scod");
        CHECK(std::stod(parsed[2]) == 0.4);
        CHECK(std::stod(parsed[3]) >= 0.0);
        CHECK(std::stoi(parsed[4]) >= 0);
        CHECK(std::stoll(parsed[5]) >= 0);
        ++rows;
    }
    CHECK(rows == 6);
}

TEST_CASE("improvement normalization anchors the baselines at 0 and 100") {
    const bench::LifecycleReport low = fake_report(bench::Strategy::kNaiveFalse,
                                                   {2.0, 2.0, 2.0});
    const bench::LifecycleReport high = fake_report(bench::Strategy::kNaiveTrue,
                                                    {1.0, 1.0, 1.0});
    const bench::LifecycleReport mid = fake_report(bench::Strategy::kScod,
                                                   {1.5, 1.5, 1.5});
    const bench::LifecycleReport better = fake_report(bench::Strategy::kDiverse,
                                                      {0.5, 0.5, 0.5});

    CHECK(bench::normalized_improvement_pct(low, low, high) == 0.0);
    CHECK(bench::normalized_improvement_pct(high, low, high) == 100.0);
    CHECK(bench::normalized_improvement_pct(mid, low, high) == doctest::Approx(50.0));
    // Values outside [0, 100] are legal: better than labeling everything.
    CHECK(bench::normalized_improvement_pct(better, low, high) ==
          doctest::Approx(150.0));
    CHECK_THROWS_AS(bench::normalized_improvement_pct(mid, low, low),
                    DegenerateBaselineError);
}

TEST_CASE("budget sweep produces anchored, sorted, fully costed rows") {
    const bench::LifecycleContext context = make_context();
    const std::vector<bench::SweepRow> rows = bench::budget_sweep(
        context, make_config(), {bench::Strategy::kRandom}, {0.4});

    REQUIRE(rows.size() == 3);
    // Sorted by strategy name: naive_false, naive_true, random.
    CHECK(rows[0].strategy == bench::Strategy::kNaiveFalse);
    CHECK(rows[0].budget_pct == 0.0);
    CHECK(rows[0].cost_pct == 0.0);
    CHECK(rows[0].improvement_pct == 0.0);
    CHECK(rows[1].strategy == bench::Strategy::kNaiveTrue);
    CHECK(rows[1].budget_pct == 100.0);
    CHECK(rows[1].cost_pct == 100.0);
    CHECK(rows[1].improvement_pct == 100.0);
    CHECK(rows[2].strategy == bench::Strategy::kRandom);
    CHECK(rows[2].budget_pct == doctest::Approx(40.0));
    // floor(0.4 * 5) = 2 of 5 inputs per batch: cost is exactly 40%.
    CHECK(rows[2].cost_pct == doctest::Approx(40.0));

    std::ostringstream out;
    bench::write_sweep_csv(out, rows);
    std::istringstream in(out.str());
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "strategy,budget_pct,cost_pct,improvement_pct");
    REQUIRE(std::getline(in, line));
    CHECK(line == "naive_false,0,0,0");
    REQUIRE(std::getline(in, line));
    CHECK(line == "naive_true,100,100,100");

    CHECK_THROWS_AS(
        bench::budget_sweep(context, make_config(), {bench::Strategy::kRandom}, {1.5}),
        InvalidBudgetError);
}

TEST_CASE("diverging retraining surfaces the batch index") {
    const bench::LifecycleContext context = make_context();
    bench::LifecycleConfig config = make_config(1.0);
    config.retrain_lr = 50.0;  // guaranteed blow-up
    config.retrain_epochs = 2000;
    try {
        bench::run_lifecycle(context, bench::Strategy::kNaiveTrue, config);
        FAIL("expected LifecycleError");
    } catch (const LifecycleError& error) {
        CHECK(error.batch_index() == 0);
        CHECK(std::string(error.what()).find("batch") != std::string::npos);
    }
}

TEST_CASE("lifecycle configuration is validated before running") {
    const bench::LifecycleContext context = make_context();
    bench::LifecycleConfig config = make_config();
    config.budget_fraction = 1.5;
    CHECK_THROWS_AS(
        bench::run_lifecycle(context, bench::Strategy::kRandom, config),
        InvalidBudgetError);
    config = make_config();
    config.retrain_lr = 0.0;
    CHECK_THROWS_AS(
        bench::run_lifecycle(context, bench::Strategy::kRandom, config), ConfigError);
}

TEST_CASE("posterior refits can be disabled and the loop still runs") {
    const bench::LifecycleContext context = make_context();
    bench::LifecycleConfig config = make_config(0.4);
    config.posterior_refit = false;
    const bench::LifecycleReport report =
        bench::run_lifecycle(context, bench::Strategy::kScod, config);
    CHECK(report.records.size() == 6);
    CHECK(report.total_cost() > 0);
}

TEST_CASE("report aggregates expose cost and lifetime loss") {
    const bench::LifecycleReport report =
        fake_report(bench::Strategy::kScod, {1.0, 2.0, 3.0, 4.0});
    CHECK(report.lifetime_mean_loss() == doctest::Approx(2.5));
    CHECK(report.total_cost() == 12);
    CHECK(report.cost_pct(6) == doctest::Approx(50.0));

    bench::LifecycleReport empty;
    CHECK_THROWS_AS(empty.lifetime_mean_loss(), DimensionError);
    CHECK(empty.total_cost() == 0);
}

TEST_CASE("median splits sorted values the usual way") {
    CHECK(bench::median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(bench::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(bench::median({7.0}) == 7.0);
    CHECK_THROWS_AS(bench::median({}), DimensionError);
}

TEST_CASE("format_double emits the shortest exact decimal form") {
    CHECK(bench::format_double(0.5) == "0.5");
    CHECK(bench::format_double(50.0) == "50");
    CHECK(bench::format_double(0.1) == "0.1");
    CHECK(bench::format_double(0.0) == "0");
    const double third = 1.0 / 3.0;
    CHECK(std::strtod(bench::format_double(third).c_str(), nullptr) == third);
    const double tricky = 0.1 + 0.2;
    CHECK(std::strtod(bench::format_double(tricky).c_str(), nullptr) == tricky);
}

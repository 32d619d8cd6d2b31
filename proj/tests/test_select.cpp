#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <vector>

#include "dlsim/rng.hpp"
#include "dlsim/select.hpp"
#include "dlsim/uq.hpp"
#include "oracles.hpp"

using namespace dlsim;

namespace {

/// Wraps raw row vectors as belief updates (1 x d matrices).
std::vector<uq::BeliefUpdate> updates_from_rows(const Eigen::MatrixXd& rows) {
    std::vector<uq::BeliefUpdate> updates;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        uq::BeliefUpdate update;
        update.matrix = rows.row(i);
        update.frobenius_norm = rows.row(i).norm();
        updates.push_back(std::move(update));
    }
    return updates;
}

select::KernelMatrix random_kernel(int m, int d, std::mt19937_64& rng) {
    Eigen::MatrixXd rows(m, d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < rows.size(); ++i) {
        rows(i / d, i % d) = normal(rng);
    }
    return select::build_kernel(updates_from_rows(rows));
}

std::vector<int> flagged_indices(const select::SelectionResult& result) {
    std::vector<int> indices;
    for (std::size_t i = 0; i < result.flags.size(); ++i) {
        if (result.flags[i]) {
            indices.push_back(static_cast<int>(i));
        }
    }
    return indices;
}

double constraint_gap(const select::KernelMatrix& kernel,
                      const Eigen::VectorXd& weights) {
    const double total = kernel.norms.sum();
    return std::abs(weights.dot(kernel.norms) - total) / std::max(1.0, total);
}

}  // namespace

TEST_CASE("naive flagging selects everything or nothing") {
    const select::SelectionResult all = select::flag_naive(5, true);
    CHECK(all.num_flagged() == 5);
    const select::SelectionResult none = select::flag_naive(5, false);
    CHECK(none.num_flagged() == 0);
    CHECK_THROWS_AS(select::flag_naive(0, true), DimensionError);
}

TEST_CASE("random flagging samples exactly the budget, reproducibly") {
    const select::SelectionResult first = select::flag_random(20, 5, 99);
    CHECK(first.num_flagged() == 5);
    const select::SelectionResult repeat = select::flag_random(20, 5, 99);
    CHECK(first.flags == repeat.flags);

    CHECK(select::flag_random(20, 0, 1).num_flagged() == 0);
    CHECK(select::flag_random(20, 25, 1).num_flagged() == 20);  // clamped
    CHECK_THROWS_AS(select::flag_random(20, -1, 1), InvalidBudgetError);

    // Uniformity smoke test: index 0 should appear in about a quarter of
    // 5-of-20 draws.
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 600; ++seed) {
        if (select::flag_random(20, 5, seed).flags[0]) {
            ++hits;
        }
    }
    CHECK(hits > 100);
    CHECK(hits < 200);
}

TEST_CASE("scod flagging takes the top scores with low-index ties") {
    const std::vector<double> scores = {0.5, 3.0, 1.0, 3.0};
    CHECK(flagged_indices(select::flag_scod_k(scores, 2)) == std::vector<int>{1, 3});
    CHECK(flagged_indices(select::flag_scod_k(scores, 1)) == std::vector<int>{1});
    CHECK(select::flag_scod_k(scores, 0).num_flagged() == 0);
    CHECK(select::flag_scod_k(scores, 9).num_flagged() == 4);  // clamped

    CHECK_THROWS_AS(select::flag_scod_k({}, 1), DimensionError);
    CHECK_THROWS_AS(select::flag_scod_k({1.0, -2.0}, -1), InvalidBudgetError);
    CHECK_THROWS_AS(
        select::flag_scod_k({1.0, std::numeric_limits<double>::quiet_NaN()}, 1),
        DimensionError);
}

TEST_CASE("kernel entries are Frobenius inner products of the updates") {
    Eigen::MatrixXd rows(2, 2);
    rows << 1.0, 0.0,   // L_0
            1.0, 1.0;   // L_1
    const select::KernelMatrix kernel =
        select::build_kernel(updates_from_rows(rows));
    CHECK(kernel.entries(0, 0) == doctest::Approx(1.0));
    CHECK(kernel.entries(0, 1) == doctest::Approx(1.0));
    CHECK(kernel.entries(1, 0) == doctest::Approx(1.0));
    CHECK(kernel.entries(1, 1) == doctest::Approx(2.0));
    CHECK(kernel.norms[0] == doctest::Approx(1.0));
    CHECK(kernel.norms[1] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("kernel is symmetric PSD and matches elementwise products") {
    std::mt19937_64 rng = make_rng(6);
    Eigen::MatrixXd rows(7, 5);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < rows.size(); ++i) {
        rows(i / 5, i % 5) = normal(rng);
    }
    const auto updates = updates_from_rows(rows);
    const select::KernelMatrix kernel = select::build_kernel(updates);

    for (int i = 0; i < 7; ++i) {
        for (int j = 0; j < 7; ++j) {
            // Independent elementwise accumulation.
            double expected = 0.0;
            for (int d = 0; d < 5; ++d) {
                expected += rows(i, d) * rows(j, d);
            }
            CHECK(oracles::rel_err(kernel.entries(i, j), expected) < 1e-12);
            CHECK(kernel.entries(i, j) == kernel.entries(j, i));
        }
    }
    const Eigen::VectorXd eigenvalues =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(kernel.entries).eigenvalues();
    CHECK(eigenvalues.minCoeff() > -1e-10);

    uq::BeliefUpdate mismatched;
    mismatched.matrix = Eigen::MatrixXd::Zero(2, 5);
    auto bad = updates;
    bad.push_back(mismatched);
    CHECK_THROWS_AS(select::build_kernel(bad), DimensionError);
}

TEST_CASE("diverse flagging on three orthonormal inputs follows the hand trace") {
    // K = I, unit norms: the optimizer must spread weight evenly.  Worked by
    // hand: after the vertex jump c = (3,0,0) the objective is 6; the second
    // step (gamma = 1/2) gives c = (1.5, 1.5, 0), objective 1.5; the third
    // (gamma = 1/3) lands exactly on c = (1,1,1), objective 0.
    const select::KernelMatrix kernel =
        select::build_kernel(updates_from_rows(Eigen::MatrixXd::Identity(3, 3)));

    const select::SelectionResult result = select::flag_diverse(kernel, 3);
    REQUIRE(result.objective_trace.size() == 3);
    CHECK(result.objective_trace[0] == doctest::Approx(6.0));
    CHECK(result.objective_trace[1] == doctest::Approx(1.5));
    CHECK(result.objective_trace[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(result.num_flagged() == 3);
    CHECK(result.weights.isApprox(Eigen::Vector3d::Ones(), 1e-9));

    // One iteration stops at the vertex.
    const select::SelectionResult single = select::flag_diverse(kernel, 1);
    CHECK(flagged_indices(single) == std::vector<int>{0});
    CHECK(single.weights[0] == doctest::Approx(3.0));
}

TEST_CASE("duplicate inputs collapse onto one representative") {
    Eigen::MatrixXd rows(3, 2);
    rows << 2.0, 0.0,
            2.0, 0.0,
            2.0, 0.0;
    const select::KernelMatrix kernel =
        select::build_kernel(updates_from_rows(rows));

    const select::SelectionResult result = select::flag_diverse(kernel, 2);
    CHECK(flagged_indices(result) == std::vector<int>{0});
    // One copy already explains all three: objective hits zero at once.
    CHECK(result.objective_trace.front() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(result.weights[0] == doctest::Approx(3.0));
}

TEST_CASE("diverse flagging keeps its invariants on random instances") {
    std::mt19937_64 rng = make_rng(42);
    for (int trial = 0; trial < 8; ++trial) {
        const select::KernelMatrix kernel = random_kernel(12, 6, rng);
        for (int budget : {1, 3, 5}) {
            const select::SelectionResult result =
                select::flag_diverse(kernel, budget);

            CHECK(result.num_flagged() <= budget);
            CHECK(result.num_flagged() >= 1);
            CHECK(constraint_gap(kernel, result.weights) < 1e-8);
            for (std::size_t iter = 1; iter < result.objective_trace.size(); ++iter) {
                CHECK(result.objective_trace[iter] <=
                      result.objective_trace[iter - 1] + 1e-9);
            }
            for (int i = 0; i < kernel.size(); ++i) {
                CHECK(result.weights[i] >= 0.0);
                CHECK(result.flags[static_cast<std::size_t>(i)] ==
                      (result.weights[i] > 0.0));
            }
        }
    }
}

TEST_CASE("diverse flagging is equivariant under input permutation") {
    std::mt19937_64 rng = make_rng(55);
    const int m = 9;
    Eigen::MatrixXd rows(m, 4);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < rows.size(); ++i) {
        rows(i / 4, i % 4) = normal(rng);
    }
    const std::vector<int> permutation = {4, 7, 0, 2, 8, 1, 6, 3, 5};
    Eigen::MatrixXd permuted(m, 4);
    for (int i = 0; i < m; ++i) {
        permuted.row(i) = rows.row(permutation[static_cast<std::size_t>(i)]);
    }

    const select::SelectionResult base =
        select::flag_diverse(select::build_kernel(updates_from_rows(rows)), 3);
    const select::SelectionResult shuffled =
        select::flag_diverse(select::build_kernel(updates_from_rows(permuted)), 3);

    for (int i = 0; i < m; ++i) {
        CHECK(shuffled.flags[static_cast<std::size_t>(i)] ==
              base.flags[static_cast<std::size_t>(permutation[static_cast<std::size_t>(i)])]);
    }
}

TEST_CASE("zero-norm inputs are never flagged; all-zero kernels select nothing") {
    Eigen::MatrixXd rows(4, 3);
    rows.setZero();
    rows.row(1) << 1.0, 0.0, 0.0;
    rows.row(3) << 0.0, 2.0, 0.0;
    const select::KernelMatrix kernel =
        select::build_kernel(updates_from_rows(rows));

    const select::SelectionResult result = select::flag_diverse(kernel, 4);
    CHECK_FALSE(result.flags[0]);
    CHECK_FALSE(result.flags[2]);
    CHECK(result.flags[1]);
    CHECK(result.flags[3]);

    const select::KernelMatrix silent =
        select::build_kernel(updates_from_rows(Eigen::MatrixXd::Zero(3, 2)));
    const select::SelectionResult nothing = select::flag_diverse(silent, 2);
    CHECK(nothing.num_flagged() == 0);
    CHECK(nothing.objective_trace.empty());

    CHECK_THROWS_AS(select::flag_diverse(kernel, 0), InvalidBudgetError);
}

TEST_CASE("exact subset search prefers orthogonal coverage over redundancy") {
    // Inputs 0 and 1 are identical, input 2 is orthogonal.  Picking {0, 2}
    // with weights (2, 1) reconstructs the whole batch exactly.
    Eigen::MatrixXd rows(3, 2);
    rows << 1.0, 0.0,
            1.0, 0.0,
            0.0, 1.0;
    const select::KernelMatrix kernel =
        select::build_kernel(updates_from_rows(rows));

    CHECK(select::solve_exact_subset(kernel, 2) == std::vector<int>{0, 2});
    CHECK(select::subset_objective(kernel, {0, 2}) ==
          doctest::Approx(0.0).epsilon(1e-10));
    CHECK(select::subset_objective(kernel, {0, 1}) > 0.5);

    // Frank-Wolfe lands on the same optimum here (worked by hand: vertex
    // jump to c = (3,0,0), then gamma = 1/3 toward 3*e_2 gives c = (2,0,1)).
    const select::SelectionResult fw = select::flag_diverse(kernel, 2);
    CHECK(flagged_indices(fw) == std::vector<int>{0, 2});
    CHECK(fw.objective_trace.back() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(fw.weights[0] == doctest::Approx(2.0));
    CHECK(fw.weights[2] == doctest::Approx(1.0));
}

TEST_CASE("exact subset search ties break toward early, small supports") {
    const select::KernelMatrix diagonal =
        select::build_kernel(updates_from_rows(Eigen::MatrixXd::Identity(3, 3)));
    // All singletons are equally good; the lowest index must win.
    CHECK(select::solve_exact_subset(diagonal, 1) == std::vector<int>{0});

    // Full budget: weight (1,1,1) zeroes the objective.
    CHECK(select::solve_exact_subset(diagonal, 3) == std::vector<int>{0, 1, 2});

    Eigen::MatrixXd duplicate_rows(3, 2);
    duplicate_rows << 1.0, 0.0,
                      1.0, 0.0,
                      1.0, 0.0;
    const select::KernelMatrix duplicates =
        select::build_kernel(updates_from_rows(duplicate_rows));
    // {0} alone reaches zero, so larger supports never replace it.
    CHECK(select::solve_exact_subset(duplicates, 2) == std::vector<int>{0});
}

TEST_CASE("per-support solver lower-bounds random feasible points") {
    std::mt19937_64 rng = make_rng(88);
    std::uniform_real_distribution<double> uniform(0.1, 2.0);
    for (int trial = 0; trial < 6; ++trial) {
        const select::KernelMatrix kernel = random_kernel(7, 4, rng);
        const double total = kernel.norms.sum();
        const std::vector<int> support = {1, 3, 6};
        const double optimum = select::subset_objective(kernel, support);

        for (int sample = 0; sample < 25; ++sample) {
            // Random feasible point on the same support.
            Eigen::VectorXd c = Eigen::VectorXd::Zero(7);
            double weighted = 0.0;
            for (int index : support) {
                c[index] = uniform(rng);
                weighted += c[index] * kernel.norms[index];
            }
            c *= total / weighted;
            const Eigen::VectorXd residual = Eigen::VectorXd::Ones(7) - c;
            const double value = residual.dot(kernel.entries * residual);
            CHECK(value >= optimum - 1e-9 * std::max(1.0, std::abs(value)));
        }
    }
}

TEST_CASE("Frank-Wolfe never beats the exhaustive reference") {
    std::mt19937_64 rng = make_rng(101);
    for (int trial = 0; trial < 10; ++trial) {
        const select::KernelMatrix kernel = random_kernel(8, 5, rng);
        for (int budget : {1, 2, 3}) {
            const select::SelectionResult fw = select::flag_diverse(kernel, budget);
            const std::vector<int> best = select::solve_exact_subset(kernel, budget);
            const double reference = select::subset_objective(kernel, best);
            CHECK(fw.objective_trace.back() >=
                  reference - 1e-9 * std::max(1.0, reference));
        }
    }
}

TEST_CASE("exhaustive search enforces its size caps and input checks") {
    std::mt19937_64 rng = make_rng(13);
    const select::KernelMatrix big = random_kernel(21, 4, rng);
    CHECK_THROWS_AS(select::solve_exact_subset(big, 2), EnumerationBoundError);

    const select::KernelMatrix small = random_kernel(6, 4, rng);
    CHECK_THROWS_AS(select::solve_exact_subset(small, 6), EnumerationBoundError);
    CHECK_THROWS_AS(select::solve_exact_subset(small, 0), InvalidBudgetError);

    CHECK_THROWS_AS(select::subset_objective(small, {0, 9}), DimensionError);
    CHECK_THROWS_AS(select::subset_objective(small, {2, 2}), DimensionError);
    CHECK_THROWS_AS(select::subset_objective(small, {}), InvalidBudgetError);
}

#include "dlsim/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dlsim/rng.hpp"

namespace dlsim::select {

namespace {

/// solve_exact_subset enumerates all supports up to this batch size / budget.
constexpr int kMaxEnumerationInputs = 20;
constexpr int kMaxEnumerationBudget = 5;

void check_kernel(const KernelMatrix& kernel) {
    if (kernel.entries.rows() != kernel.entries.cols()) {
        throw DimensionError("kernel matrix must be square");
    }
    if (kernel.norms.size() != kernel.entries.rows()) {
        throw DimensionError("kernel norms length does not match matrix size");
    }
    if (kernel.entries.rows() < 1) {
        throw DimensionError("kernel must cover at least one input");
    }
}

/// Indices whose belief updates are non-trivial; zero-norm inputs can never
/// influence the objective and are excluded from optimization.
std::vector<int> usable_indices(const KernelMatrix& kernel) {
    std::vector<int> usable;
    for (int i = 0; i < kernel.size(); ++i) {
        if (kernel.norms[i] > 0.0) {
            usable.push_back(i);
        }
    }
    return usable;
}

SelectionResult empty_selection(int batch_size) {
    SelectionResult result;
    result.flags.assign(static_cast<std::size_t>(batch_size), false);
    result.weights = Eigen::VectorXd::Zero(batch_size);
    return result;
}

/// Solves the equality-constrained quadratic restricted to the coordinates
/// in `free_set` via its KKT system, enforcing c >= 0 afterwards.  Returns
/// false when the system has no usable solution for this active set.
bool solve_active_set(const Eigen::MatrixXd& entries, const Eigen::VectorXd& norms,
                      const Eigen::VectorXd& row_sums, double norm_total,
                      const std::vector<int>& free_set, Eigen::VectorXd& solution) {
    const int t = static_cast<int>(free_set.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(t + 1, t + 1);
    Eigen::VectorXd rhs(t + 1);
    for (int a = 0; a < t; ++a) {
        for (int b = 0; b < t; ++b) {
            kkt(a, b) = 2.0 * entries(free_set[a], free_set[b]);
        }
        kkt(a, t) = norms[free_set[a]];
        kkt(t, a) = norms[free_set[a]];
        rhs[a] = 2.0 * row_sums[free_set[a]];
    }
    rhs[t] = norm_total;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    Eigen::VectorXd packed;
    if (lu.isInvertible()) {
        packed = lu.solve(rhs);
    } else {
        // Singular KKT systems happen with duplicate inputs; accept any
        // consistent least-squares solution.
        packed = kkt.completeOrthogonalDecomposition().solve(rhs);
        const double residual = (kkt * packed - rhs).norm();
        if (residual > 1e-8 * std::max(1.0, rhs.norm())) {
            return false;
        }
    }

    solution = packed.head(t);
    for (int a = 0; a < t; ++a) {
        if (solution[a] < -1e-10) {
            return false;
        }
        solution[a] = std::max(solution[a], 0.0);
    }
    const double constraint = solution.dot(
        Eigen::VectorXd::NullaryExpr(t, [&](Eigen::Index a) { return norms[free_set[a]]; }));
    return std::abs(constraint - norm_total) <= 1e-8 * std::max(1.0, norm_total);
}

double residual_objective(const Eigen::MatrixXd& entries, const Eigen::VectorXd& c) {
    const Eigen::VectorXd residual = Eigen::VectorXd::Ones(c.size()) - c;
    return residual.dot(entries.selfadjointView<Eigen::Lower>() * residual);
}

}  // namespace

int SelectionResult::num_flagged() const {
    return static_cast<int>(std::count(flags.begin(), flags.end(), true));
}

SelectionResult flag_naive(int batch_size, bool value) {
    if (batch_size < 1) {
        throw DimensionError("batch_size must be positive");
    }
    SelectionResult result = empty_selection(batch_size);
    result.flags.assign(static_cast<std::size_t>(batch_size), value);
    return result;
}

SelectionResult flag_random(int batch_size, int budget, std::uint64_t seed) {
    if (batch_size < 1) {
        throw DimensionError("batch_size must be positive");
    }
    if (budget < 0) {
        throw InvalidBudgetError("budget must be non-negative");
    }
    const int k = std::min(budget, batch_size);
    std::vector<int> order(static_cast<std::size_t>(batch_size));
    std::iota(order.begin(), order.end(), 0);

    // Partial Fisher-Yates: the first k entries are a uniform sample without
    // replacement.
    std::mt19937_64 rng = make_rng(seed);
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, batch_size - 1);
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(pick(rng))]);
    }

    SelectionResult result = empty_selection(batch_size);
    for (int i = 0; i < k; ++i) {
        result.flags[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    }
    return result;
}

SelectionResult flag_scod_k(const std::vector<double>& uncertainties, int budget) {
    if (uncertainties.empty()) {
        throw DimensionError("uncertainty list must not be empty");
    }
    if (budget < 0) {
        throw InvalidBudgetError("budget must be non-negative");
    }
    for (double score : uncertainties) {
        if (!std::isfinite(score)) {
            throw DimensionError("uncertainty scores must be finite");
        }
    }
    const int m = static_cast<int>(uncertainties.size());
    const int k = std::min(budget, m);

    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    // stable_sort keeps equal scores in index order, so ties break low.
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return uncertainties[static_cast<std::size_t>(a)] >
               uncertainties[static_cast<std::size_t>(b)];
    });

    SelectionResult result = empty_selection(m);
    for (int i = 0; i < k; ++i) {
        result.flags[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    }
    return result;
}

KernelMatrix build_kernel(const std::vector<uq::BeliefUpdate>& updates) {
    if (updates.empty()) {
        throw DimensionError("build_kernel needs at least one belief update");
    }
    const Eigen::Index rows = updates.front().matrix.rows();
    const Eigen::Index cols = updates.front().matrix.cols();
    const int m = static_cast<int>(updates.size());

    // Flatten each update; the Frobenius inner products form the Gram matrix
    // of the flattened columns, so the kernel is symmetric PSD by
    // construction.
    Eigen::MatrixXd flattened(rows * cols, m);
    for (int i = 0; i < m; ++i) {
        const Eigen::MatrixXd& matrix = updates[static_cast<std::size_t>(i)].matrix;
        if (matrix.rows() != rows || matrix.cols() != cols) {
            throw DimensionError("belief updates in a batch must share one shape");
        }
        flattened.col(i) = Eigen::Map<const Eigen::VectorXd>(matrix.data(), rows * cols);
    }

    KernelMatrix kernel;
    kernel.entries = Eigen::MatrixXd::Zero(m, m);
    kernel.entries.selfadjointView<Eigen::Lower>().rankUpdate(flattened.transpose());
    kernel.entries = kernel.entries.selfadjointView<Eigen::Lower>();
    kernel.norms = kernel.entries.diagonal().cwiseMax(0.0).cwiseSqrt();
    return kernel;
}

SelectionResult flag_diverse(const KernelMatrix& kernel, int budget) {
    check_kernel(kernel);
    if (budget < 1) {
        throw InvalidBudgetError("flag_diverse needs a budget of at least 1");
    }

    const int m = kernel.size();
    const std::vector<int> usable = usable_indices(kernel);
    if (usable.empty()) {
        // All-zero kernel: nothing carries information, nothing to flag.
        return empty_selection(m);
    }

    // Compact the problem onto the usable coordinates.
    const int u = static_cast<int>(usable.size());
    Eigen::MatrixXd entries(u, u);
    Eigen::VectorXd norms(u);
    for (int a = 0; a < u; ++a) {
        norms[a] = kernel.norms[usable[static_cast<std::size_t>(a)]];
        for (int b = 0; b < u; ++b) {
            entries(a, b) = kernel.entries(usable[static_cast<std::size_t>(a)],
                                           usable[static_cast<std::size_t>(b)]);
        }
    }
    const double norm_total = norms.sum();
    const int iterations = std::min(budget, u);

    Eigen::VectorXd c = Eigen::VectorXd::Zero(u);
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(iterations));

    for (int iter = 0; iter < iterations; ++iter) {
        // Linear minimization oracle: the vertex whose (norm-scaled)
        // alignment with the current residual is steepest.
        const Eigen::VectorXd residual = Eigen::VectorXd::Ones(u) - c;
        const Eigen::VectorXd alignment = entries * residual;
        int best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < u; ++i) {
            const double score = alignment[i] / norms[i];
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }

        Eigen::VectorXd vertex = Eigen::VectorXd::Zero(u);
        vertex[best] = norm_total / norms[best];

        if (iter == 0) {
            // The start c = 0 is infeasible; the first step lands on the
            // selected vertex, the only feasible point with that support.
            c = vertex;
        } else {
            const Eigen::VectorXd direction = vertex - c;
            const double curvature = direction.dot(entries * direction);
            double step = 0.0;
            if (curvature > 0.0) {
                step = std::clamp(direction.dot(entries * residual) / curvature, 0.0, 1.0);
            }
            c += step * direction;
        }
        trace.push_back(residual_objective(entries, c));
    }

    SelectionResult result = empty_selection(m);
    result.objective_trace = std::move(trace);
    for (int a = 0; a < u; ++a) {
        if (c[a] > 0.0) {
            result.flags[static_cast<std::size_t>(usable[static_cast<std::size_t>(a)])] =
                true;
            result.weights[usable[static_cast<std::size_t>(a)]] = c[a];
        }
    }
    return result;
}

double subset_objective(const KernelMatrix& kernel, const std::vector<int>& support) {
    check_kernel(kernel);
    const int m = kernel.size();
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    for (int index : support) {
        if (index < 0 || index >= m) {
            throw DimensionError("support index out of range");
        }
        if (seen[static_cast<std::size_t>(index)]) {
            throw DimensionError("support indices must be distinct");
        }
        seen[static_cast<std::size_t>(index)] = true;
    }

    const double norm_total = kernel.norms.sum();
    if (support.empty()) {
        if (norm_total > 0.0) {
            throw InvalidBudgetError(
                "empty support cannot satisfy the normalization constraint");
        }
        return 0.0;
    }

    const Eigen::VectorXd row_sums = kernel.entries.rowwise().sum();
    double best = std::numeric_limits<double>::infinity();
    const int s = static_cast<int>(support.size());

    // Enumerate active sets: the optimum lies on some face of the positive
    // orthant, i.e. some subset of the support carries nonzero weight.
    for (unsigned mask = 1; mask < (1u << s); ++mask) {
        std::vector<int> free_set;
        for (int a = 0; a < s; ++a) {
            if (mask & (1u << a)) {
                free_set.push_back(support[static_cast<std::size_t>(a)]);
            }
        }
        Eigen::VectorXd solution;
        if (!solve_active_set(kernel.entries, kernel.norms, row_sums, norm_total,
                              free_set, solution)) {
            continue;
        }
        Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
        for (std::size_t a = 0; a < free_set.size(); ++a) {
            c[free_set[a]] = solution[static_cast<Eigen::Index>(a)];
        }
        best = std::min(best, residual_objective(kernel.entries, c));
    }

    if (!std::isfinite(best)) {
        throw InvalidBudgetError(
            "support cannot satisfy the normalization constraint");
    }
    return best;
}

std::vector<int> solve_exact_subset(const KernelMatrix& kernel, int budget) {
    check_kernel(kernel);
    if (budget < 1) {
        throw InvalidBudgetError("solve_exact_subset needs a budget of at least 1");
    }

    const std::vector<int> usable = usable_indices(kernel);
    if (usable.empty()) {
        return {};
    }
    if (static_cast<int>(usable.size()) > kMaxEnumerationInputs) {
        throw EnumerationBoundError("exhaustive search is capped at " +
                                    std::to_string(kMaxEnumerationInputs) +
                                    " usable inputs");
    }
    if (budget > kMaxEnumerationBudget) {
        throw EnumerationBoundError("exhaustive search is capped at budget " +
                                    std::to_string(kMaxEnumerationBudget));
    }

    const int u = static_cast<int>(usable.size());
    const int k = std::min(budget, u);

    std::vector<int> best_support;
    double best_objective = std::numeric_limits<double>::infinity();

    // Sizes ascending, lexicographic within a size: on ties the smallest,
    // earliest support wins because later candidates must be strictly
    // better.
    std::vector<int> combination;
    auto recurse = [&](auto&& self, int start, int remaining) -> void {
        if (remaining == 0) {
            const double objective = subset_objective(kernel, combination);
            if (objective < best_objective - 1e-12) {
                best_objective = objective;
                best_support = combination;
            }
            return;
        }
        for (int i = start; i <= u - remaining; ++i) {
            combination.push_back(usable[static_cast<std::size_t>(i)]);
            self(self, i + 1, remaining - 1);
            combination.pop_back();
        }
    };
    for (int size = 1; size <= k; ++size) {
        recurse(recurse, 0, size);
    }
    return best_support;
}

}  // namespace dlsim::select

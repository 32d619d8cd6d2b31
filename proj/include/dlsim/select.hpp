#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "dlsim/errors.hpp"
#include "dlsim/uq.hpp"

namespace dlsim::select {

/// Which inputs of a batch get flagged for labeling, plus diagnostics from
/// the optimizer when one was involved.
struct SelectionResult {
    std::vector<bool> flags;

    /// Frank-Wolfe coefficients over the batch (zero vector for strategies
    /// that do not optimize a relaxation).
    Eigen::VectorXd weights;

    /// Objective value after each Frank-Wolfe iteration; empty for other
    /// strategies.
    std::vector<double> objective_trace;

    int num_flagged() const;
};

/// Pairwise inner products of belief updates: entries[i][j] =
/// <L_i, L_j>_Frobenius.  Symmetric positive semidefinite.  `norms` holds
/// the per-input magnitudes sqrt(entries[i][i]).
struct KernelMatrix {
    Eigen::MatrixXd entries;
    Eigen::VectorXd norms;

    int size() const { return static_cast<int>(entries.rows()); }
};

/// Flags every input (value = true) or none (value = false).
SelectionResult flag_naive(int batch_size, bool value);

/// Flags `budget` inputs chosen uniformly without replacement.
SelectionResult flag_random(int batch_size, int budget, std::uint64_t seed);

/// Flags the `budget` inputs with the highest uncertainty scores.  Ties are
/// broken toward the lower index.
SelectionResult flag_scod_k(const std::vector<double>& uncertainties, int budget);

/// Builds the belief-update kernel for one batch.  All updates must share
/// the same weight-space dimension.
KernelMatrix build_kernel(const std::vector<uq::BeliefUpdate>& updates);

/// Diversity-aware flagging.  Runs `budget` Frank-Wolfe iterations on the
/// relaxed subset-selection problem
///
///     min_{c >= 0} (1 - c)^T K (1 - c)   s.t.  sum_i c_i * n_i = sum_i n_i
///
/// where n_i are the kernel norms.  Each iteration picks the vertex with the
/// steepest normalized alignment to the residual, so at most `budget` inputs
/// end up with nonzero weight; those become the flags.  Zero-norm inputs are
/// excluded up front.  An all-zero kernel yields an empty selection.
SelectionResult flag_diverse(const KernelMatrix& kernel, int budget);

/// Exhaustive reference for flag_diverse: enumerates every support of size
/// <= budget (skipping zero-norm inputs), solves the same constrained
/// quadratic restricted to that support, and returns the best support found.
/// Ties break toward smaller, lexicographically earlier supports.  Only
/// meant for small instances: throws EnumerationBoundError when the batch
/// has more than 20 usable inputs or budget exceeds 5.
std::vector<int> solve_exact_subset(const KernelMatrix& kernel, int budget);

/// Optimal objective value of the constrained quadratic restricted to
/// `support` (used by solve_exact_subset; exposed for verification).
double subset_objective(const KernelMatrix& kernel, const std::vector<int>& support);

}  // namespace dlsim::select

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dlsim/errors.hpp"
#include "dlsim/nnet.hpp"

namespace dlsim::uq {

/// How one input would update the weight posterior if it were labeled: the
/// network Jacobian at that input, whitened by the inverse square root of
/// the predictive covariance.  Rows live in output space, columns in weight
/// space.
struct BeliefUpdate {
    Eigen::MatrixXd matrix;        // output_dim x param_count
    double frobenius_norm = 0.0;
};

/// Low-rank Laplace approximation of the weight posterior around a trained
/// model.  The covariance it represents is
///
///     Sigma = (M * F_data + eps^{-2} I)^{-1}
///
/// where M * F_data is approximated by basis * diag(eigenvalues) * basis^T,
/// the top-r eigenpair part of the dataset curvature.  `basis` has
/// orthonormal columns and `eigenvalues` is non-negative and descending.
struct LowRankPosterior {
    Eigen::MatrixXd basis;          // param_count x rank
    Eigen::VectorXd eigenvalues;    // rank entries, descending, >= 0
    double prior_scale = 1.0;       // eps: prior stddev of each weight
    std::uint64_t dataset_size = 0; // number of examples the fit saw

    Eigen::Index dim() const { return basis.rows(); }
    Eigen::Index rank() const { return basis.cols(); }

    /// Structural sanity check; throws DimensionError / InvalidRankError /
    /// ArtifactError when the invariants above are broken.
    void validate() const;
};

enum class FitMode { kExact, kSketched };

/// Parses "exact" or "sketched"; throws ConfigError otherwise.
FitMode parse_fit_mode(const std::string& name);
std::string fit_mode_name(FitMode mode);

/// Knobs for fit_posterior, bundled so lifecycle code can refit with the
/// same settings it used initially.
struct FitConfig {
    int rank = 40;
    double epsilon = 1.0;
    FitMode mode = FitMode::kExact;
    std::uint64_t sketch_seed = 0;
};

/// Computes the belief update for one input under the current weights:
/// L = Sigma_pred^{-1/2} * J where J is the weight Jacobian at the input.
/// Throws CovarianceError if the predictive covariance cannot be factored.
BeliefUpdate belief_update(const nnet::Architecture& arch,
                           const nnet::WeightVector& weights,
                           const Eigen::VectorXd& input);

/// Fits the low-rank posterior at `weights` from the curvature of the
/// training data.  `mode` kExact forms the full curvature matrix and takes
/// its top-r eigenpairs; kSketched uses a randomized range finder with one
/// power iteration (seeded, deterministic) and never materializes the full
/// matrix.  Throws InvalidRankError when rank is not in [1, param_count].
LowRankPosterior fit_posterior(const nnet::Architecture& arch,
                               const nnet::WeightVector& weights,
                               const std::vector<nnet::LabeledExample>& data,
                               const FitConfig& config);

/// Predicted epistemic uncertainty of one input: trace(F Sigma) where F is
/// the Fisher information carried by `update` (F = L^T L) and Sigma is the
/// posterior covariance.  Evaluated in factored form without materializing
/// any param_count x param_count matrix.  Non-negative by construction.
double uncertainty(const LowRankPosterior& posterior, const BeliefUpdate& update);

/// Binary serialization.  Fixed little-endian layout, in order:
///   u64 param_count, u64 rank, f64 prior_scale, u64 dataset_size,
///   f64[param_count * rank] basis (column-major), f64[rank] eigenvalues.
/// Round trip is bit-exact.  Loading throws ArtifactError on missing files,
/// truncation, or invariant violations.
void save_posterior(const LowRankPosterior& posterior, const std::string& path);
LowRankPosterior load_posterior(const std::string& path);
void write_posterior(std::ostream& out, const LowRankPosterior& posterior);
LowRankPosterior read_posterior(std::istream& in, const std::string& context);

}  // namespace dlsim::uq

#include "dlsim/uq.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "binary_io.hpp"
#include "dlsim/rng.hpp"

namespace dlsim::uq {

using detail::read_f64;
using detail::read_u64;
using detail::write_f64;
using detail::write_u64;

namespace {

/// Oversampling columns added to the sketch width (standard randomized
/// range-finder headroom).
constexpr int kSketchOversampling = 10;

/// Stacks the whitened Jacobians of every example into one tall matrix A
/// (sum of output dims x param_count).  The dataset curvature is A^T A.
Eigen::MatrixXd stacked_updates(const nnet::Architecture& arch,
                                const nnet::WeightVector& weights,
                                const std::vector<nnet::LabeledExample>& data) {
    const Eigen::Index d_out = arch.output_dim();
    const Eigen::Index n_params = arch.param_count();
    Eigen::MatrixXd stacked(d_out * static_cast<Eigen::Index>(data.size()), n_params);
    for (std::size_t i = 0; i < data.size(); ++i) {
        BeliefUpdate update = belief_update(arch, weights, data[i].input);
        stacked.middleRows(static_cast<Eigen::Index>(i) * d_out, d_out) = update.matrix;
    }
    return stacked;
}

/// Top-r eigenpairs of A^T A, formed explicitly.  Exact up to the dense
/// symmetric eigensolver.
void exact_eigenpairs(const Eigen::MatrixXd& stacked, int rank,
                      Eigen::MatrixXd& basis, Eigen::VectorXd& eigenvalues) {
    const Eigen::Index n = stacked.cols();
    Eigen::MatrixXd curvature = Eigen::MatrixXd::Zero(n, n);
    curvature.selfadjointView<Eigen::Lower>().rankUpdate(stacked.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.compute(curvature);
    if (solver.info() != Eigen::Success) {
        throw CovarianceError("eigendecomposition of the dataset curvature failed");
    }

    // Eigen returns ascending order; keep the top `rank` in descending order.
    basis.resize(n, rank);
    eigenvalues.resize(rank);
    for (int j = 0; j < rank; ++j) {
        const Eigen::Index source = n - 1 - j;
        basis.col(j) = solver.eigenvectors().col(source);
        eigenvalues[j] = std::max(solver.eigenvalues()[source], 0.0);
    }
}

/// Randomized range finder with one power iteration followed by
/// Rayleigh-Ritz extraction.  Never materializes the n x n curvature;
/// products with it are evaluated as A^T (A X).  Ritz values from a
/// subspace never exceed the true eigenvalues.
void sketched_eigenpairs(const Eigen::MatrixXd& stacked, int rank, std::uint64_t seed,
                         Eigen::MatrixXd& basis, Eigen::VectorXd& eigenvalues) {
    const Eigen::Index n = stacked.cols();
    const Eigen::Index width =
        std::min<Eigen::Index>(n, rank + kSketchOversampling);

    std::mt19937_64 rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd probe(n, width);
    for (Eigen::Index j = 0; j < width; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            probe(i, j) = normal(rng);
        }
    }

    // Step 1: range sketch Y = (A^T A) * probe, orthonormalized.
    Eigen::MatrixXd sketch = stacked.transpose() * (stacked * probe);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr1(sketch);
    Eigen::MatrixXd q = qr1.householderQ() * Eigen::MatrixXd::Identity(n, width);

    // Step 2: one power iteration sharpens the subspace toward the top
    // eigenvectors.
    Eigen::MatrixXd powered = stacked.transpose() * (stacked * q);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr2(powered);
    q = qr2.householderQ() * Eigen::MatrixXd::Identity(n, width);

    // Step 3: Rayleigh-Ritz.  The compressed operator Q^T (A^T A) Q is the
    // Gram matrix of A*Q, so it is symmetric PSD by construction.
    Eigen::MatrixXd compressed_factor = stacked * q;
    Eigen::MatrixXd small = Eigen::MatrixXd::Zero(width, width);
    small.selfadjointView<Eigen::Lower>().rankUpdate(compressed_factor.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.compute(small);
    if (solver.info() != Eigen::Success) {
        throw CovarianceError("eigendecomposition of the sketched curvature failed");
    }

    basis.resize(n, rank);
    eigenvalues.resize(rank);
    for (int j = 0; j < rank; ++j) {
        const Eigen::Index source = width - 1 - j;
        basis.col(j) = q * solver.eigenvectors().col(source);
        eigenvalues[j] = std::max(solver.eigenvalues()[source], 0.0);
    }
}

}  // namespace

FitMode parse_fit_mode(const std::string& name) {
    if (name == "exact") return FitMode::kExact;
    if (name == "sketched") return FitMode::kSketched;
    throw ConfigError("unknown posterior mode '" + name +
                      "' (expected exact or sketched)");
}

std::string fit_mode_name(FitMode mode) {
    return mode == FitMode::kExact ? "exact" : "sketched";
}

void LowRankPosterior::validate() const {
    if (basis.rows() < 1) {
        throw DimensionError("posterior basis has no rows");
    }
    if (basis.cols() < 1 || basis.cols() > basis.rows()) {
        throw InvalidRankError("posterior rank must be in [1, dim], got " +
                               std::to_string(basis.cols()));
    }
    if (eigenvalues.size() != basis.cols()) {
        throw DimensionError("posterior eigenvalue count does not match basis rank");
    }
    if (!(prior_scale > 0.0) || !std::isfinite(prior_scale)) {
        throw ArtifactError("posterior prior_scale must be a positive finite number");
    }
    if (!basis.allFinite() || !eigenvalues.allFinite()) {
        throw ArtifactError("posterior contains non-finite entries");
    }
    for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
        if (eigenvalues[j] < 0.0) {
            throw ArtifactError("posterior eigenvalues must be non-negative");
        }
        if (j > 0 && eigenvalues[j] > eigenvalues[j - 1] + 1e-9) {
            throw ArtifactError("posterior eigenvalues must be in descending order");
        }
    }
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    const double ortho_error =
        (gram - Eigen::MatrixXd::Identity(rank(), rank())).cwiseAbs().maxCoeff();
    if (ortho_error > 1e-6) {
        throw ArtifactError("posterior basis columns are not orthonormal");
    }
}

BeliefUpdate belief_update(const nnet::Architecture& arch,
                           const nnet::WeightVector& weights,
                           const Eigen::VectorXd& input) {
    const Eigen::MatrixXd jacobian = nnet::weight_jacobian(arch, weights, input);
    const nnet::GaussianPrediction prediction = nnet::forward(arch, weights, input);
    Eigen::LLT<Eigen::MatrixXd> llt(prediction.covariance);
    if (llt.info() != Eigen::Success) {
        throw CovarianceError("predictive covariance is not positive definite");
    }
    BeliefUpdate update;
    // Whitening: L = C^{-1/2} J via the Cholesky factor of the covariance.
    update.matrix = llt.matrixL().solve(jacobian);
    update.frobenius_norm = update.matrix.norm();
    return update;
}

LowRankPosterior fit_posterior(const nnet::Architecture& arch,
                               const nnet::WeightVector& weights,
                               const std::vector<nnet::LabeledExample>& data,
                               const FitConfig& config) {
    arch.validate();
    if (data.empty()) {
        throw DimensionError("fit_posterior needs at least one example");
    }
    const Eigen::Index n_params = arch.param_count();
    if (config.rank < 1 || config.rank > n_params) {
        throw InvalidRankError("rank must be in [1, " + std::to_string(n_params) +
                               "], got " + std::to_string(config.rank));
    }
    if (!(config.epsilon > 0.0) || !std::isfinite(config.epsilon)) {
        throw ConfigError("epsilon must be a positive finite number");
    }

    const Eigen::MatrixXd stacked = stacked_updates(arch, weights, data);

    LowRankPosterior posterior;
    posterior.prior_scale = config.epsilon;
    posterior.dataset_size = data.size();
    if (config.mode == FitMode::kExact) {
        exact_eigenpairs(stacked, config.rank, posterior.basis, posterior.eigenvalues);
    } else {
        sketched_eigenpairs(stacked, config.rank, config.sketch_seed, posterior.basis,
                            posterior.eigenvalues);
    }
    return posterior;
}

double uncertainty(const LowRankPosterior& posterior, const BeliefUpdate& update) {
    if (update.matrix.cols() != posterior.dim()) {
        throw DimensionError("belief update spans " +
                             std::to_string(update.matrix.cols()) +
                             " weights, posterior spans " +
                             std::to_string(posterior.dim()));
    }
    const double eps2 = posterior.prior_scale * posterior.prior_scale;

    // trace(L Sigma L^T) with Sigma = (B D B^T + eps^{-2} I)^{-1} expands via
    // the Woodbury identity to
    //   eps^2 ||L||_F^2 - sum_j s_j ||L b_j||^2,
    //   s_j = eps^4 lambda_j / (1 + eps^2 lambda_j),
    // so only the r projections of L onto the basis are ever needed.
    double value = eps2 * update.frobenius_norm * update.frobenius_norm;
    const Eigen::MatrixXd projections = update.matrix * posterior.basis;
    for (Eigen::Index j = 0; j < posterior.rank(); ++j) {
        const double lambda = posterior.eigenvalues[j];
        const double shrink = eps2 * eps2 * lambda / (1.0 + eps2 * lambda);
        value -= shrink * projections.col(j).squaredNorm();
    }
    return std::max(value, 0.0);
}

void write_posterior(std::ostream& out, const LowRankPosterior& posterior) {
    posterior.validate();
    write_u64(out, static_cast<std::uint64_t>(posterior.dim()));
    write_u64(out, static_cast<std::uint64_t>(posterior.rank()));
    write_f64(out, posterior.prior_scale);
    write_u64(out, posterior.dataset_size);
    for (Eigen::Index j = 0; j < posterior.rank(); ++j) {
        for (Eigen::Index i = 0; i < posterior.dim(); ++i) {
            write_f64(out, posterior.basis(i, j));
        }
    }
    for (Eigen::Index j = 0; j < posterior.rank(); ++j) {
        write_f64(out, posterior.eigenvalues[j]);
    }
    if (!out) {
        throw ArtifactError("failed to write posterior stream");
    }
}

LowRankPosterior read_posterior(std::istream& in, const std::string& context) {
    const std::uint64_t dim = read_u64(in, context);
    const std::uint64_t rank = read_u64(in, context);
    const double prior_scale = read_f64(in, context);
    const std::uint64_t dataset_size = read_u64(in, context);
    if (dim == 0 || rank == 0 || rank > dim || dim > (1ULL << 32)) {
        throw ArtifactError(context + ": implausible posterior header");
    }

    LowRankPosterior posterior;
    posterior.prior_scale = prior_scale;
    posterior.dataset_size = dataset_size;
    posterior.basis.resize(static_cast<Eigen::Index>(dim),
                           static_cast<Eigen::Index>(rank));
    for (std::uint64_t j = 0; j < rank; ++j) {
        for (std::uint64_t i = 0; i < dim; ++i) {
            posterior.basis(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(j)) = read_f64(in, context);
        }
    }
    posterior.eigenvalues.resize(static_cast<Eigen::Index>(rank));
    for (std::uint64_t j = 0; j < rank; ++j) {
        posterior.eigenvalues[static_cast<Eigen::Index>(j)] = read_f64(in, context);
    }

    try {
        posterior.validate();
    } catch (const std::exception& error) {
        throw ArtifactError(context + ": " + error.what());
    }
    return posterior;
}

void save_posterior(const LowRankPosterior& posterior, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ArtifactError("cannot open '" + path + "' for writing");
    }
    write_posterior(out, posterior);
    if (!out) {
        throw ArtifactError("failed to write posterior to '" + path + "'");
    }
}

LowRankPosterior load_posterior(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArtifactError("cannot open posterior file '" + path +
                            "'; run `dlsim fit` first");
    }
    return read_posterior(in, path);
}

}  // namespace dlsim::uq

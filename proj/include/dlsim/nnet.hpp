#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "dlsim/errors.hpp"

namespace dlsim::nnet {

enum class Activation { kTanh, kRelu };

/// Parses "tanh" or "relu"; throws ConfigError otherwise.
Activation parse_activation(const std::string& name);
std::string activation_name(Activation activation);

/// Shape of a fully-connected network.  `layer_widths` lists every layer
/// including input and output, e.g. {16, 32, 32, 2} is a 16-input, 2-output
/// network with two hidden layers of width 32.  The output head is Gaussian
/// with fixed covariance sigma^2 * I; sigma is part of the architecture
/// because the loss and all downstream uncertainty math depend on it.
struct Architecture {
    std::vector<int> layer_widths;
    Activation activation = Activation::kTanh;
    double output_noise_sigma = 0.1;

    int input_dim() const { return layer_widths.front(); }
    int output_dim() const { return layer_widths.back(); }

    /// Number of affine layers (one less than layer_widths.size()).
    int num_affine_layers() const {
        return static_cast<int>(layer_widths.size()) - 1;
    }

    /// Total number of trainable parameters: sum over affine layers of
    /// (fan_in + 1) * fan_out.
    std::int64_t param_count() const;

    /// Throws DimensionError if the shape is unusable (fewer than two
    /// layers, non-positive widths) and ConfigError if sigma is not a
    /// positive finite number.
    void validate() const;
};

/// All trainable parameters flattened into one vector.  Layout, per affine
/// layer in order: the weight matrix in row-major order (fan_out x fan_in),
/// then the bias (fan_out).  Downstream code relies on this layout when it
/// interprets Jacobian columns as directions in weight space.
using WeightVector = Eigen::VectorXd;

/// A Gaussian predictive distribution over the output vector.
struct GaussianPrediction {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

struct LabeledExample {
    Eigen::VectorXd input;
    Eigen::VectorXd target;
};

/// Outcome of a training run.  `loss_increased` is a warning flag set when
/// the final full-dataset loss exceeds the initial one (possible with a hot
/// learning rate); callers decide whether that is acceptable.
struct TrainResult {
    WeightVector weights;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    bool loss_increased = false;
};

/// Samples initial weights uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)]
/// per layer; biases start at zero.
WeightVector init_weights(const Architecture& arch, std::uint64_t seed);

/// Deterministic forward pass.  Returns the predicted mean and the fixed
/// covariance sigma^2 * I.  Throws DimensionError on shape mismatch.
GaussianPrediction forward(const Architecture& arch, const WeightVector& weights,
                           const Eigen::VectorXd& input);

/// Jacobian of the network output with respect to every weight, evaluated by
/// one reverse-mode sweep per output row.  Shape: output_dim x param_count,
/// columns ordered exactly like WeightVector.
Eigen::MatrixXd weight_jacobian(const Architecture& arch, const WeightVector& weights,
                                const Eigen::VectorXd& input);

/// Gaussian negative log-likelihood of `target` under `prediction`, with the
/// additive constant dropped: 0.5 * r^T Sigma^{-1} r where r is the residual.
/// Always >= 0.  Throws CovarianceError if the covariance cannot be factored.
double nll_loss(const GaussianPrediction& prediction, const Eigen::VectorXd& target);

/// Mean nll_loss over a dataset.  Throws DimensionError on empty data.
double mean_loss(const Architecture& arch, const WeightVector& weights,
                 const std::vector<LabeledExample>& data);

/// Gradient of mean_loss over `batch` with respect to the weights, computed
/// in closed form by reverse mode.  Exposed so its consistency with the loss
/// can be checked independently.
Eigen::VectorXd batch_loss_gradient(const Architecture& arch, const WeightVector& weights,
                                    const std::vector<LabeledExample>& batch);

/// Minibatch SGD on the negative log-likelihood.  Each epoch visits the data
/// in a seeded random order in minibatches of up to 32 examples.  Throws
/// TrainingDivergedError (with the epoch attached) as soon as a non-finite
/// loss appears.
TrainResult train(const Architecture& arch, const WeightVector& initial_weights,
                  const std::vector<LabeledExample>& data, int epochs,
                  double learning_rate, std::uint64_t seed);

}  // namespace dlsim::nnet

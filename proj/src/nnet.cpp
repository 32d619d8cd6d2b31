#include "dlsim/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dlsim/rng.hpp"

namespace dlsim::nnet {

namespace {

constexpr int kMinibatchSize = 32;

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;
using ConstBiasMap = Eigen::Map<const Eigen::VectorXd>;

/// Offset of layer `layer`'s weight block inside the flat weight vector.
std::int64_t layer_offset(const Architecture& arch, int layer) {
    std::int64_t offset = 0;
    for (int l = 0; l < layer; ++l) {
        const std::int64_t fan_in = arch.layer_widths[l];
        const std::int64_t fan_out = arch.layer_widths[l + 1];
        offset += (fan_in + 1) * fan_out;
    }
    return offset;
}

ConstWeightMap weight_block(const Architecture& arch, const WeightVector& weights,
                            int layer) {
    const int fan_in = arch.layer_widths[layer];
    const int fan_out = arch.layer_widths[layer + 1];
    return ConstWeightMap(weights.data() + layer_offset(arch, layer), fan_out, fan_in);
}

ConstBiasMap bias_block(const Architecture& arch, const WeightVector& weights,
                        int layer) {
    const std::int64_t fan_in = arch.layer_widths[layer];
    const int fan_out = arch.layer_widths[layer + 1];
    return ConstBiasMap(weights.data() + layer_offset(arch, layer) + fan_in * fan_out,
                        fan_out);
}

void check_model_inputs(const Architecture& arch, const WeightVector& weights,
                        const Eigen::VectorXd& input) {
    arch.validate();
    if (weights.size() != arch.param_count()) {
        throw DimensionError("weight vector has " + std::to_string(weights.size()) +
                             " entries, architecture needs " +
                             std::to_string(arch.param_count()));
    }
    if (input.size() != arch.input_dim()) {
        throw DimensionError("input has " + std::to_string(input.size()) +
                             " entries, architecture expects " +
                             std::to_string(arch.input_dim()));
    }
}

double apply_activation(Activation activation, double a) {
    return activation == Activation::kTanh ? std::tanh(a) : std::max(a, 0.0);
}

/// Derivative of the activation expressed through preactivation `a` and
/// post-activation `h` (for tanh, 1 - h^2 is cheaper and more stable).
double activation_derivative(Activation activation, double a, double h) {
    return activation == Activation::kTanh ? 1.0 - h * h : (a > 0.0 ? 1.0 : 0.0);
}

/// Layer-by-layer forward pass that keeps every intermediate needed for
/// reverse mode: post-activations[l] is the input to affine layer l, and
/// preactivations[l] is its raw output before the nonlinearity.
struct ForwardTrace {
    std::vector<Eigen::VectorXd> post_activations;
    std::vector<Eigen::VectorXd> preactivations;

    const Eigen::VectorXd& output() const { return preactivations.back(); }
};

ForwardTrace forward_trace(const Architecture& arch, const WeightVector& weights,
                           const Eigen::VectorXd& input) {
    const int num_layers = arch.num_affine_layers();
    ForwardTrace trace;
    trace.post_activations.reserve(num_layers);
    trace.preactivations.reserve(num_layers);

    Eigen::VectorXd h = input;
    for (int l = 0; l < num_layers; ++l) {
        trace.post_activations.push_back(h);
        Eigen::VectorXd a = weight_block(arch, weights, l) * h + bias_block(arch, weights, l);
        trace.preactivations.push_back(a);
        if (l + 1 < num_layers) {
            h.resize(a.size());
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                h[i] = apply_activation(arch.activation, a[i]);
            }
        }
    }
    return trace;
}

/// Backpropagates `output_gradient` (dLoss/dOutput) through the trace and
/// adds the resulting weight gradient into `accumulator`.
void accumulate_weight_gradient(const Architecture& arch, const WeightVector& weights,
                                const ForwardTrace& trace,
                                const Eigen::VectorXd& output_gradient,
                                Eigen::Ref<Eigen::VectorXd> accumulator) {
    const int num_layers = arch.num_affine_layers();
    Eigen::VectorXd delta = output_gradient;
    for (int l = num_layers - 1; l >= 0; --l) {
        const int fan_in = arch.layer_widths[l];
        const int fan_out = arch.layer_widths[l + 1];
        const std::int64_t offset = layer_offset(arch, l);
        const Eigen::VectorXd& h = trace.post_activations[l];

        // Weight block: dLoss/dW[i, j] = delta[i] * h[j], stored row-major.
        Eigen::Map<RowMajorMatrix> weight_grad(accumulator.data() + offset, fan_out,
                                               fan_in);
        weight_grad.noalias() += delta * h.transpose();
        accumulator.segment(offset + static_cast<std::int64_t>(fan_in) * fan_out,
                            fan_out) += delta;

        if (l > 0) {
            Eigen::VectorXd upstream = weight_block(arch, weights, l).transpose() * delta;
            const Eigen::VectorXd& a = trace.preactivations[l - 1];
            const Eigen::VectorXd& post = trace.post_activations[l];
            delta.resize(fan_in);
            for (int i = 0; i < fan_in; ++i) {
                delta[i] = upstream[i] *
                           activation_derivative(arch.activation, a[i], post[i]);
            }
        }
    }
}

}  // namespace

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::kTanh;
    if (name == "relu") return Activation::kRelu;
    throw ConfigError("unknown activation '" + name + "' (expected tanh or relu)");
}

std::string activation_name(Activation activation) {
    return activation == Activation::kTanh ? "tanh" : "relu";
}

std::int64_t Architecture::param_count() const {
    std::int64_t count = 0;
    for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
        count += (static_cast<std::int64_t>(layer_widths[l]) + 1) * layer_widths[l + 1];
    }
    return count;
}

void Architecture::validate() const {
    if (layer_widths.size() < 2) {
        throw DimensionError("architecture needs at least an input and an output layer");
    }
    for (int width : layer_widths) {
        if (width < 1) {
            throw DimensionError("layer widths must be positive, got " +
                                 std::to_string(width));
        }
    }
    if (!std::isfinite(output_noise_sigma) || output_noise_sigma <= 0.0) {
        throw ConfigError("output_noise_sigma must be a positive finite number");
    }
}

WeightVector init_weights(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    WeightVector weights = WeightVector::Zero(arch.param_count());
    std::mt19937_64 rng = make_rng(seed);
    for (int l = 0; l < arch.num_affine_layers(); ++l) {
        const std::int64_t fan_in = arch.layer_widths[l];
        const std::int64_t fan_out = arch.layer_widths[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> uniform(-bound, bound);
        const std::int64_t offset = layer_offset(arch, l);
        for (std::int64_t i = 0; i < fan_in * fan_out; ++i) {
            weights[offset + i] = uniform(rng);
        }
        // Biases (the trailing fan_out entries of the block) stay zero.
    }
    return weights;
}

GaussianPrediction forward(const Architecture& arch, const WeightVector& weights,
                           const Eigen::VectorXd& input) {
    check_model_inputs(arch, weights, input);
    ForwardTrace trace = forward_trace(arch, weights, input);
    GaussianPrediction prediction;
    prediction.mean = trace.output();
    const double variance = arch.output_noise_sigma * arch.output_noise_sigma;
    prediction.covariance =
        variance * Eigen::MatrixXd::Identity(arch.output_dim(), arch.output_dim());
    return prediction;
}

Eigen::MatrixXd weight_jacobian(const Architecture& arch, const WeightVector& weights,
                                const Eigen::VectorXd& input) {
    check_model_inputs(arch, weights, input);
    ForwardTrace trace = forward_trace(arch, weights, input);

    const int d_out = arch.output_dim();
    Eigen::MatrixXd jacobian = Eigen::MatrixXd::Zero(d_out, arch.param_count());
    Eigen::VectorXd basis = Eigen::VectorXd::Zero(d_out);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(arch.param_count());
    for (int r = 0; r < d_out; ++r) {
        basis.setZero();
        basis[r] = 1.0;
        row.setZero();
        accumulate_weight_gradient(arch, weights, trace, basis, row);
        jacobian.row(r) = row;
    }
    return jacobian;
}

double nll_loss(const GaussianPrediction& prediction, const Eigen::VectorXd& target) {
    if (prediction.mean.size() != target.size()) {
        throw DimensionError("target has " + std::to_string(target.size()) +
                             " entries, prediction has " +
                             std::to_string(prediction.mean.size()));
    }
    if (prediction.covariance.rows() != prediction.mean.size() ||
        prediction.covariance.cols() != prediction.mean.size()) {
        throw DimensionError("covariance shape does not match prediction mean");
    }
    const Eigen::VectorXd residual = target - prediction.mean;
    Eigen::LLT<Eigen::MatrixXd> llt(prediction.covariance);
    if (llt.info() != Eigen::Success) {
        throw CovarianceError("predictive covariance is not positive definite");
    }
    return 0.5 * residual.dot(llt.solve(residual));
}

double mean_loss(const Architecture& arch, const WeightVector& weights,
                 const std::vector<LabeledExample>& data) {
    if (data.empty()) {
        throw DimensionError("mean_loss needs at least one example");
    }
    double total = 0.0;
    for (const LabeledExample& example : data) {
        total += nll_loss(forward(arch, weights, example.input), example.target);
    }
    return total / static_cast<double>(data.size());
}

Eigen::VectorXd batch_loss_gradient(const Architecture& arch, const WeightVector& weights,
                                    const std::vector<LabeledExample>& batch) {
    if (batch.empty()) {
        throw DimensionError("batch_loss_gradient needs at least one example");
    }
    check_model_inputs(arch, weights, batch.front().input);
    const double inv_variance =
        1.0 / (arch.output_noise_sigma * arch.output_noise_sigma);
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(arch.param_count());
    for (const LabeledExample& example : batch) {
        if (example.target.size() != arch.output_dim()) {
            throw DimensionError("target dimension does not match architecture output");
        }
        ForwardTrace trace = forward_trace(arch, weights, example.input);
        // dLoss/dOutput for 0.5 * |y - f|^2 / sigma^2 is (f - y) / sigma^2.
        Eigen::VectorXd output_gradient =
            inv_variance * (trace.output() - example.target);
        accumulate_weight_gradient(arch, weights, trace, output_gradient, gradient);
    }
    return gradient / static_cast<double>(batch.size());
}

TrainResult train(const Architecture& arch, const WeightVector& initial_weights,
                  const std::vector<LabeledExample>& data, int epochs,
                  double learning_rate, std::uint64_t seed) {
    if (data.empty()) {
        throw DimensionError("train needs at least one example");
    }
    if (epochs < 0) {
        throw ConfigError("epochs must be non-negative");
    }
    if (!std::isfinite(learning_rate) || learning_rate <= 0.0) {
        throw ConfigError("learning_rate must be a positive finite number");
    }
    check_model_inputs(arch, initial_weights, data.front().input);

    TrainResult result;
    result.weights = initial_weights;
    result.initial_loss = mean_loss(arch, initial_weights, data);

    std::mt19937_64 rng = make_rng(seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<LabeledExample> minibatch;
    minibatch.reserve(kMinibatchSize);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += kMinibatchSize) {
            const std::size_t end = std::min(order.size(), start + kMinibatchSize);
            minibatch.clear();
            for (std::size_t i = start; i < end; ++i) {
                minibatch.push_back(data[order[i]]);
            }
            for (const LabeledExample& example : minibatch) {
                epoch_loss +=
                    nll_loss(forward(arch, result.weights, example.input), example.target);
            }
            result.weights -=
                learning_rate * batch_loss_gradient(arch, result.weights, minibatch);
        }
        epoch_loss /= static_cast<double>(data.size());
        if (!std::isfinite(epoch_loss)) {
            throw TrainingDivergedError(
                static_cast<std::size_t>(epoch),
                "training loss became non-finite at epoch " + std::to_string(epoch));
        }
    }

    result.final_loss = mean_loss(arch, result.weights, data);
    if (!std::isfinite(result.final_loss)) {
        throw TrainingDivergedError(static_cast<std::size_t>(epochs),
                                    "final training loss is non-finite");
    }
    result.loss_increased = result.final_loss > result.initial_loss;
    return result;
}

}  // namespace dlsim::nnet

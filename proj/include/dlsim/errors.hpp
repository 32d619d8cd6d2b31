#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dlsim {

/// Thrown when vector or matrix shapes are inconsistent with each other or
/// with the model that is supposed to consume them.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a caller requests an invalid low-rank size (r < 1 or r > N).
class InvalidRankError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a flagging budget is outside its documented range.
class InvalidBudgetError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an exhaustive subset search is asked to enumerate more
/// candidates than the documented problem-size cap allows.
class EnumerationBoundError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a predictive covariance cannot be factored (not positive
/// definite).
class CovarianceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when SGD produces a non-finite training loss.  Carries the epoch
/// at which divergence was detected.
class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(std::size_t epoch, const std::string& message)
        : std::runtime_error(message), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

/// Thrown when a lifecycle run aborts because retraining diverged.  Carries
/// the stream batch index where the failure happened.
class LifecycleError : public std::runtime_error {
public:
    LifecycleError(std::size_t batch_index, const std::string& message)
        : std::runtime_error(message), batch_index_(batch_index) {}

    std::size_t batch_index() const noexcept { return batch_index_; }

private:
    std::size_t batch_index_;
};

/// Thrown when normalized improvement is requested but the two baselines are
/// too close together for the normalization to be meaningful.
class DegenerateBaselineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown for malformed configuration files: unknown keys, unparsable values,
/// or values outside their documented ranges.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a serialized artifact (model or posterior file) is missing,
/// truncated, or structurally invalid.
class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dlsim

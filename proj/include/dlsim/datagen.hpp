#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dlsim/errors.hpp"
#include "dlsim/nnet.hpp"

namespace dlsim::datagen {

/// The three input regimes a deployed model can encounter.  The enum values
/// double as indices into StreamConfig::regime_mix.
enum class RegimeKind : int { kInDistribution = 0, kShifted = 1, kCorrupted = 2 };

std::string regime_name(RegimeKind kind);

/// Ground-truth generator: a fixed random network whose outputs define the
/// labels.  Deployed models are trained to imitate it from noisy samples.
struct Teacher {
    nnet::Architecture arch;
    nnet::WeightVector weights;
};

/// Stream shape and regime mixture.  Defaults give the standard evaluation
/// stream: 100 batches of 20, equal thirds of nominal / shifted / corrupted
/// inputs, and a sensor-degradation rate ramping up to 10% by the last batch.
struct StreamConfig {
    int num_batches = 100;
    int batch_size = 20;
    std::array<double, 3> regime_mix = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    double degradation_max = 0.1;
    std::uint64_t seed = 0;

    /// Throws ConfigError on non-positive sizes, negative mixture weights,
    /// an all-zero mixture, or degradation_max outside [0, 0.1].
    void validate() const;
};

/// One stream batch.  `inputs` is batch_size x input_dim; `regime_tags`
/// records which regime produced each row.  Tags are analysis metadata:
/// flagging strategies never see them.
struct Batch {
    int batch_index = 0;
    Eigen::MatrixXd inputs;
    std::vector<RegimeKind> regime_tags;
};

/// Builds the ground-truth teacher: a tanh network d_in -> 32 -> 32 -> d_out
/// with weights drawn once from the seeded initializer, its first layer
/// softened to keep the mapping smooth over the stream's input range, and
/// its output layer rescaled to a fixed label spread over nominal inputs.
Teacher make_teacher(int d_in, int d_out, std::uint64_t seed);

/// The teacher's noise-free label for one input.
Eigen::VectorXd oracle_label(const Teacher& teacher, const Eigen::VectorXd& input);

/// Draws `count` in-distribution training pairs: inputs ~ N(0, I), targets =
/// teacher output plus N(0, noise_sigma^2) observation noise per coordinate.
std::vector<nnet::LabeledExample> training_set(const Teacher& teacher, int count,
                                               double noise_sigma, std::uint64_t seed);

/// Generates batch `batch_index` of the stream.  Deterministic function of
/// (config, batch_index): regenerating any batch needs no history.  Each
/// row's regime is sampled from regime_mix; in-distribution rows are
/// N(0, I), shifted rows add +3 to the first ceil(d/2) coordinates, and
/// corrupted rows have a random contiguous coordinate block multiplied by
/// gain 3.  Afterwards every coordinate is independently zeroed with
/// probability degradation_max * batch_index / (num_batches - 1), the
/// degrading-sensor schedule (0 on the first batch, regime-independent).
Batch next_batch(const StreamConfig& config, int input_dim, int batch_index);

/// Labels every row of a batch with the teacher (no observation noise).
std::vector<nnet::LabeledExample> label_batch(const Teacher& teacher, const Batch& batch);

/// Writes one batch as CSV: header "batch_index,row,regime,x0,...,x{d-1}".
void write_batch_csv(std::ostream& out, const Batch& batch);

/// Writes the whole stream to <dir>/stream.csv for offline inspection.
void export_stream_csv(const std::string& dir, const StreamConfig& config, int input_dim);

}  // namespace dlsim::datagen

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsv/common.hpp"
#include "nsv/lift.hpp"
#include "nsv/nn.hpp"
#include "nsv/transport.hpp"

namespace nsv::embed {

enum class DistanceMode { box, torus };

std::string distance_mode_name(DistanceMode m);
DistanceMode distance_mode_from_name(const std::string& name);

/// Cyclic annealing schedule: beta stays 0 for zero_frac of the cycle, ramps
/// linearly to 1 over ramp_frac, holds at 1 for the rest, then resets.
struct BetaSchedule {
    std::size_t cycle = 2000;
    double zero_frac = 0.25;
    double ramp_frac = 0.25;
    double hold_frac = 0.5;

    void validate() const;
};

double beta_schedule(std::size_t step, const BetaSchedule& schedule);

struct EmbedConfig {
    std::size_t d = 2;
    double w_reconstruct = 1.0;
    double w_smooth = 1.0;
    double w_space = 0.1;
    double L0 = 0.0;  // 0 resolves to 2*sqrt(d)/seq_len at training time
    int eta = 1;
    DistanceMode mode = DistanceMode::box;
    BetaSchedule beta;
    transport::SinkhornConfig sinkhorn{.blur = 0.05, .max_iters = 100, .tol = 1e-6};
    std::size_t space_points = 128;  // cloud cap fed to the space-filling loss
    std::size_t batch = 48;          // triplets per step
    std::size_t steps = 4000;
    std::size_t val_interval = 200;
    nn::AdamConfig adam;
    double omega0 = 30.0;
    double sine_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    double effective_l0(std::size_t seq_len) const;
};

/// Per-dimension z-score statistics computed on the train split only.
struct Standardization {
    Vec mean;
    Vec stdev;

    Vec apply(std::span<const double> x) const;
    Vec invert(std::span<const double> z) const;
};

Standardization fit_standardization(const std::vector<lift::LatentSeries>& train);

struct EmbeddingModel {
    nn::MlpParams encoder;  // obs -> 128 -> 64 -> 32 -> d, all sine
    nn::MlpParams decoder;  // d -> 32 -> 64 -> 128 -> obs, sine except final linear
    Standardization standardization;
    std::size_t d = 0;
    std::size_t obs_dim = 0;
    std::string config_fingerprint;
};

EmbeddingModel init_embedding(std::size_t obs_dim, const EmbedConfig& cfg);

/// Observation -> neural state variable in [-1,1]^d.
Vec encode(const EmbeddingModel& model, std::span<const double> observation);

/// Neural state variable -> reconstructed observation (original units).
Vec decode(const EmbeddingModel& model, std::span<const double> v);

/// Distance in the state-variable domain: plain Euclidean (box) or Euclidean
/// on per-coordinate wrapped differences over the period-2 torus.
double nsv_distance(std::span<const double> a, std::span<const double> b, DistanceMode mode);

/// Hinged two-gap smoothness penalty:
///   max(0, dist(V2, V0) - 2 L0) + eta * max(0, dist(V1, V0) - L0).
double smoothness_loss(std::span<const double> v0, std::span<const double> v1,
                       std::span<const double> v2, double l0, int eta, DistanceMode mode);

/// One triplet of consecutive observations.
using Triplet = std::array<const Vec*, 3>;

struct LossBreakdown {
    double total = 0.0;
    double reconstruct = 0.0;  // mean per-sample squared error, standardized units
    double smooth = 0.0;
    double space = 0.0;
};

/// Full training objective on one batch of triplets; gradients for both nets.
/// step_seed drives the uniform reference resampling for the space term.
LossBreakdown total_loss(const std::vector<Triplet>& batch, const EmbeddingModel& model,
                         double beta, double l0, const EmbedConfig& cfg,
                         std::uint64_t step_seed, nn::Gradients* enc_grads,
                         nn::Gradients* dec_grads);

struct TrainingReport {
    struct Row {
        std::size_t step;
        double total, reconstruct, smooth, space, anneal;
    };
    std::vector<Row> rows;
    std::vector<std::pair<std::size_t, double>> val_history;  // (step, val mse)
    double best_val = 0.0;
    std::size_t best_step = 0;
    std::string status = "ok";
};

/// Train on the dataset's train split, checkpointing the best validation
/// reconstruction. A NaN loss aborts with the last good checkpoint.
EmbeddingModel train_embedding(const lift::Dataset& dataset, const EmbedConfig& cfg,
                               TrainingReport* report = nullptr);

/// Mean squared reconstruction error per observation (standardized units).
double reconstruction_mse(const EmbeddingModel& model,
                          const std::vector<lift::LatentSeries>& split);

/// Encoded trajectory in the neural state variable space.
struct NsvTrajectory {
    std::vector<Vec> states;
    double dt = 0.0;
    std::string system;
    std::uint64_t trajectory_seed = 0;
    std::size_t seq_index = 0;
};

NsvTrajectory encode_series(const EmbeddingModel& model, const lift::LatentSeries& series);
std::vector<NsvTrajectory> encode_split(const EmbeddingModel& model,
                                        const std::vector<lift::LatentSeries>& split);

}  // namespace nsv::embed

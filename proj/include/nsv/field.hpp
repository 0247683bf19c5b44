#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nsv/common.hpp"
#include "nsv/embed.hpp"
#include "nsv/nn.hpp"

namespace nsv::field {

using embed::NsvTrajectory;

/// Architecture follows the dimension rule: 6 layers up to d = 2, 8 layers
/// beyond (widths 32-64-128[-256-128]-64-32, ReLU, final linear).
std::vector<nn::LayerSpec> field_architecture(std::size_t d);

struct FieldModel {
    nn::MlpParams net;
    std::size_t d = 0;
    std::string config_fingerprint;
};

FieldModel init_field(std::size_t d, std::uint64_t seed);

Vec eval_field(const FieldModel& model, std::span<const double> v);

/// Arbitrary callable field, used for damped and synthetic dynamics.
using FieldFn = std::function<Vec(std::span<const double>)>;

/// Fixed-step RK4 over dt/substeps internal steps; n_steps output samples
/// including the initial state. Throws ComputeError with the step index on
/// divergence.
NsvTrajectory integrate(const FieldFn& f, std::span<const double> v0, double dt,
                        std::size_t n_steps, std::size_t substeps);
NsvTrajectory integrate(const FieldModel& model, std::span<const double> v0, double dt,
                        std::size_t n_steps, std::size_t substeps);

struct FilterResult {
    std::vector<NsvTrajectory> kept;
    std::vector<std::size_t> removed_indices;
    double threshold = 0.0;
};

/// Threshold = the given percentile of all consecutive-step distances in the
/// set; a trajectory is dropped iff any of its steps exceeds the threshold.
FilterResult filter_trajectories(const std::vector<NsvTrajectory>& trajectories,
                                 double percentile);

/// Sawtooth annealing for the horizon-weight rho: lo -> hi linearly over each
/// cycle, reset at cycle boundaries.
struct RhoSchedule {
    std::size_t cycle = 1000;
    double lo = 0.1;
    double hi = 0.9;
};

double rho_schedule(std::size_t step, const RhoSchedule& schedule);

enum class TrainMode { integrated, finite_difference };

std::string train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& name);

struct FieldTrainConfig {
    RhoSchedule rho;
    std::size_t substeps = 1;      // integration substeps per dt during training
    double percentile = 99.0;      // recorded; filtering itself happens upstream
    std::size_t batch = 8;         // trajectory segments per step
    std::size_t steps = 2500;
    std::size_t max_horizon = 16;  // cap on integrated steps per segment; 0 = full
    std::size_t val_interval = 200;
    std::size_t val_horizon = 16;
    nn::AdamConfig adam;
    TrainMode mode = TrainMode::integrated;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Multi-horizon integrated prediction loss (geometric rho weights, each
/// start's weights normalized to 1) over every start index of every
/// trajectory in the batch. Gradients flow through the unrolled RK4 steps.
double field_loss(const FieldModel& model, const std::vector<NsvTrajectory>& batch, double rho,
                  std::size_t substeps, nn::Gradients* grads = nullptr);

struct TrainingReport {
    struct Row {
        std::size_t step;
        double loss, rho;
    };
    std::vector<Row> rows;
    std::vector<std::pair<std::size_t, double>> val_history;
    double best_val = 0.0;
    std::size_t best_step = 0;
    std::string status = "ok";
};

/// Train on already-filtered trajectories, checkpointing the best validation
/// rollout error. finite_difference mode regresses the field onto one-step
/// difference quotients instead of integrating.
FieldModel train_field(const std::vector<NsvTrajectory>& train,
                       const std::vector<NsvTrajectory>& val, const FieldTrainConfig& cfg,
                       TrainingReport* report = nullptr);

/// Mean Euclidean error of `horizon`-step rollouts from each trajectory start.
double rollout_error(const FieldModel& model, const std::vector<NsvTrajectory>& trajectories,
                     std::size_t horizon, std::size_t substeps);

/// Mean one-step prediction error.
double single_step_error(const FieldModel& model, const std::vector<NsvTrajectory>& trajectories,
                         std::size_t substeps);

}  // namespace nsv::field

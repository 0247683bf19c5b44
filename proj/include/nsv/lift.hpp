#pragma once

#include <cstdint>
#include <vector>

#include "nsv/common.hpp"
#include "nsv/systems.hpp"

namespace nsv::lift {

/// Fixed nonlinear injection of low-dimensional states into observation
/// space: obs = A s + sin(W s + b) componentwise. A has orthonormal columns,
/// so the linear skip keeps distinct states separated; the sine features make
/// the compression problem nontrivial.
struct LiftParams {
    std::size_t d_in = 0;
    std::size_t D = 0;
    std::uint64_t seed = 0;
    Mat W;  // D x d_in, entries uniform in [-2, 2]
    Vec b;  // D, uniform in [0, 2*pi)
    Mat A;  // D x d_in, orthonormal columns
};

/// Deterministic given seed. Requires D >= 2 * d_in. Resamples with an
/// incremented sub-seed if the skip matrix comes out rank deficient (up to 8
/// attempts).
LiftParams make_lift(std::size_t d_in, std::size_t D, std::uint64_t seed);

Vec apply_lift(const LiftParams& lift, std::span<const double> s);

/// Observation sequence standing in for encoded video latents.
struct LatentSeries {
    std::vector<Vec> observations;
    double dt = 0.0;
    std::string system;
    std::uint64_t lift_seed = 0;
    std::uint64_t trajectory_seed = 0;
    std::size_t seq_index = 0;
};

/// State-to-lift-input transform: optionally replaces each angle coordinate
/// by its (sin, cos) pair to avoid the 2*pi seam, then divides by fixed
/// per-dimension scales so every fed coordinate is O(1).
std::vector<std::size_t> angle_indices(const systems::SystemParams& params);
std::size_t lift_input_dim(const systems::SystemParams& params, bool angle_wrap);
Vec lift_input(const systems::SystemParams& params, std::span<const double> state,
               bool angle_wrap, std::span<const double> input_scale);

struct DatasetConfig {
    systems::SystemParams params;
    systems::AmplitudeRange range;
    std::size_t observation_dim = 64;
    bool angle_wrap = false;
    Vec input_scale;  // length lift_input_dim; empty means all ones
    double dt = 1.0 / 60.0;
    std::size_t seq_len = 60;
    std::size_t substeps = 10;
    std::size_t n_train = 96;
    std::size_t n_val = 12;
    std::size_t n_test = 12;
    std::uint64_t seed = 0;

    void validate() const;
    Vec effective_scale() const;
};

struct Dataset {
    DatasetConfig cfg;
    LiftParams lift;
    std::vector<LatentSeries> train, val, test;

    const std::vector<LatentSeries>& split(const std::string& name) const;
};

/// Simulate every sequence (seed derived per global sequence index, so the
/// splits are disjoint by construction) and push each state through the lift.
Dataset build_dataset(const DatasetConfig& cfg);

/// Re-run the deterministic simulation behind one series; used wherever an
/// observation needs to be traced back to its ground-truth state.
systems::Trajectory resimulate(const DatasetConfig& cfg, const LatentSeries& series);

}  // namespace nsv::lift

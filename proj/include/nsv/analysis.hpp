#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nsv/common.hpp"
#include "nsv/eig.hpp"
#include "nsv/embed.hpp"
#include "nsv/field.hpp"

namespace nsv::analysis {

using embed::NsvTrajectory;

/// Callable field with an optional analytic Jacobian. Trained models supply
/// the exact reverse-mode Jacobian; synthetic fields may leave it empty and
/// fall back to central differences.
struct Field {
    std::size_t d = 0;
    std::function<Vec(std::span<const double>)> eval;
    std::function<Mat(std::span<const double>)> jacobian;  // may be null
};

Field as_field(const field::FieldModel& model);
Field linear_field(const Mat& a, const Vec& center);

/// F_gamma(V) = F(V) - gamma (V - V_eq); gamma = 0 reproduces F pointwise.
Field damped_field(const Field& f, const Vec& v_eq, double gamma);

enum class JacobianMethod { analytic, central_fd };

Mat jacobian_at(const Field& f, std::span<const double> v, JacobianMethod method,
                double h = 1e-4);

using eig::Complex;

/// Re-exported small-matrix eigenvalue solve (see eig.hpp).
inline std::vector<Complex> eigenvalues_small(const Mat& m) { return eig::eigenvalues_small(m); }

/// One |Im| per conjugate pair above the tolerance, sorted descending.
Vec natural_frequencies(const std::vector<Complex>& eigs, double imag_tol = 1e-6);

// ---------------------------------------------------------------------------
// Stability (Lyapunov sampling) and equilibrium identification.
// ---------------------------------------------------------------------------

/// Distances here are Euclidean after scaling each coordinate by its
/// per-dimension data range, so epsilons read as fractions of the range.
struct StabilityParams {
    std::size_t n_directions = 10;  // n_d
    std::size_t n_radii = 10;       // n_e
    std::size_t horizon = 300;      // T (trajectory length in samples)
    Vec epsilons{0.005, 0.01, 0.03, 0.05, 0.10};
    double dt = 1.0 / 60.0;
    std::size_t substeps = 4;
    bool strict_radius = true;  // also require the certified radius >= eps/2
    std::uint64_t seed = 0;

    void validate() const;
};

struct StabilityOutcome {
    bool stable = false;
    std::vector<std::pair<double, bool>> per_epsilon;
};

StabilityOutcome check_stability(const Field& f, std::span<const double> v_eq,
                                 std::span<const double> range, const StabilityParams& params);

struct EquilibriumReport {
    Vec v_eq;
    bool stable = false;
    std::vector<std::pair<double, bool>> per_epsilon;
    double residual = 0.0;
    std::string provenance;  // "data" | "grid" | "tail"
    Mat jacobian;
    std::vector<Complex> eigenvalues;
    Vec frequencies;
};

struct EquilibriumSearchParams {
    std::size_t n_candidates = 10;  // C
    std::size_t grid_per_dim = 10;  // N (only used when d > 2)
    std::size_t grid_budget = 10000;
    double newton_tol = 1e-8;
    std::size_t newton_max_iters = 100;
    double residual_accept = 1e-6;
    double merge_radius = 0.01;  // in range-scaled distance
    StabilityParams stability;

    void validate() const;
};

/// Newton root search from low-|F| data states (plus a grid when d > 2 and
/// any explicitly provided candidates), de-duplicated, with stability,
/// Jacobian, and frequency analysis per accepted root.
std::vector<EquilibriumReport> find_equilibria(const Field& f,
                                               const std::vector<Vec>& test_states,
                                               const EquilibriumSearchParams& params,
                                               const std::vector<Vec>& extra_candidates = {});

/// Average of the final n_tail states of each trajectory; candidate states
/// for systems whose orbits settle onto their equilibria.
std::vector<Vec> tail_average_candidates(const std::vector<NsvTrajectory>& trajectories,
                                         std::size_t n_tail = 10);

// ---------------------------------------------------------------------------
// Chaos metrics.
// ---------------------------------------------------------------------------

/// r(t) = |A(t) - B(t)| / |A(0) - B(0)|; requires a positive initial gap.
Vec divergence_series(const NsvTrajectory& a, const NsvTrajectory& b);

/// Fraction of the N^d boxes of [-1,1]^d visited up to each sample
/// (nondecreasing). States outside the domain are clamped with a warning.
Vec coverage_series(const NsvTrajectory& traj, std::size_t n_bins = 10);

/// (last - first) / (length - 1): coverage gain per step.
double coverage_increase_rate(std::span<const double> series);

struct KMeansResult {
    double lo_centroid = 0.0;
    double hi_centroid = 0.0;
    double threshold = 0.0;  // midpoint; values above are the "high" class
};

/// 1-d two-means, best inertia over 10 seeded restarts.
KMeansResult kmeans_2(std::span<const double> values, std::uint64_t seed = 0);

struct ChaosConfig {
    std::size_t n_bins = 10;
    double near_pair_fraction = 0.01;  // of range-scaled distance
    std::size_t histogram_bins = 20;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ChaosReport {
    Vec rates;                     // coverage increase rate per trajectory
    std::vector<int> classes;     // 1 = chaotic, 0 = regular
    KMeansResult clustering;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // near-pair indices
    std::vector<Vec> divergence_curves;                      // one per pair
    Vec mean_divergence_regular;   // averaged curves per class
    Vec mean_divergence_chaotic;
    Vec distance_to_eq;            // per-trajectory mean, range-scaled
    Vec histogram_edges;
    Vec histogram_regular;
    Vec histogram_chaotic;
    double final_divergence_regular = 0.0;
    double final_divergence_chaotic = 0.0;
    std::string note;
};

ChaosReport chaos_report(const std::vector<NsvTrajectory>& trajectories,
                         std::span<const double> v_eq, std::span<const double> range,
                         const ChaosConfig& cfg);

// ---------------------------------------------------------------------------
// Limit cycles and damped synthesis.
// ---------------------------------------------------------------------------

struct LimitCycleConfig {
    double transient_fraction = 0.5;
    double annulus_ratio = 0.25;      // min/max distance-to-center bound
    double recurrence_fraction = 0.9; // share of tail points that must recur
    double recurrence_tol = 0.05;     // of mean cycle radius
    std::size_t min_period_samples = 4;

    void validate() const;
};

struct LimitCycleReport {
    bool detected = false;
    std::string status;  // "ok" | "inconclusive"
    double period = 0.0;
    double mean_radius = 0.0;
    double transient_time = 0.0;
    double recurrence_residual = 0.0;
};

LimitCycleReport detect_limit_cycle(const NsvTrajectory& traj,
                                    const LimitCycleConfig& cfg = {});

/// Generalized trajectory smoothness: the l^p norm (in time) of the k-th
/// finite-difference derivative. normalize divides each dimension by its
/// range (the trajectory's own range unless one is supplied).
double smoothness_metric(const NsvTrajectory& traj, int k, double p, bool normalize,
                         std::span<const double> range = {});

}  // namespace nsv::analysis

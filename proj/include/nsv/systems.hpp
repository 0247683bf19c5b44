#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "nsv/common.hpp"

namespace nsv::systems {

// ---------------------------------------------------------------------------
// Parameter sets. All masses/lengths/rates must be positive; validate()
// throws ValidationError naming the offending field.
// ---------------------------------------------------------------------------

struct SpringMassParams {
    double mass = 1.0;    // kg
    double spring = 80.0; // N/m
    void validate() const;
};

struct PendulumParams {
    double mass = 1.0;     // kg
    double length = 0.5;   // m
    double gravity = 9.81; // m/s^2
    void validate() const;
};

struct DoublePendulumParams {
    double m1 = 1.0, m2 = 1.0;       // kg
    double L1 = 0.205, L2 = 0.179;   // m
    double W1 = 0.038, W2 = 0.038;   // m
    double gravity = 9.81;           // m/s^2
    void validate() const;

    // moments of inertia of the uniform rectangular arms about their centers
    double I1() const { return m1 * (L1 * L1 + W1 * W1) / 12.0; }
    double I2() const { return m2 * (L2 * L2 + W2 * W2) / 12.0; }
};

struct HopfParams {
    double mu = 0.25;                       // bifurcation parameter
    double omega = 6.283185307179586477;    // rad/s
    double radial = 1.0;                    // radial stiffness a > 0
    void validate() const;
};

using SystemParams =
    std::variant<SpringMassParams, PendulumParams, DoublePendulumParams, HopfParams>;

std::size_t state_dim(const SystemParams& params);
std::string system_name(const SystemParams& params);
void validate(const SystemParams& params);

/// Parse "spring_mass" | "single_pendulum" | "double_pendulum" | "hopf" into
/// default-constructed params for that system.
SystemParams params_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// States and trajectories.
// ---------------------------------------------------------------------------

struct State {
    Vec values;
    double t = 0.0;
};

struct Trajectory {
    std::vector<State> states;
    double dt = 0.0;
    std::string system;
    std::uint64_t seed = 0;

    std::size_t size() const { return states.size(); }
    void validate() const;
};

/// Per-dimension sampling box for initial states.
struct AmplitudeRange {
    Vec lo;
    Vec hi;
    void validate(std::size_t dim) const;
};

// ---------------------------------------------------------------------------
// Derivative functions. Each checks the state length and returns d(state)/dt.
// ---------------------------------------------------------------------------

Vec spring_mass_deriv(std::span<const double> state, const SpringMassParams& p);
Vec single_pendulum_deriv(std::span<const double> state, const PendulumParams& p);

/// Plate double pendulum. The angular accelerations solve the 2x2 linear
/// system obtained from the Lagrangian of the rectangular-arm kinetic and
/// potential energies, so double_pendulum_energy is conserved along exact
/// solutions.
Vec double_pendulum_deriv(std::span<const double> state, const DoublePendulumParams& p);

/// Total energy T + V, zero when both arms are horizontal and at rest.
double double_pendulum_energy(std::span<const double> state, const DoublePendulumParams& p);

/// Hopf normal form extended with a decaying z axis:
///   x' = mu x - w y - a x (x^2+y^2),  y' = w x + mu y - a y (x^2+y^2),  z' = -z.
Vec hopf_deriv(std::span<const double> state, const HopfParams& p);

/// Dispatch to the system's derivative function.
Vec system_deriv(const SystemParams& params, std::span<const double> state);

/// Analytic (spring mass, single pendulum, Hopf) or numerically linearized
/// (double pendulum) natural frequencies at the stable equilibrium, rad/s,
/// sorted descending.
Vec linear_frequencies(const SystemParams& params);

// ---------------------------------------------------------------------------
// Sampling and integration.
// ---------------------------------------------------------------------------

State sample_initial_state(const SystemParams& params, std::uint64_t seed,
                           const AmplitudeRange& range);

/// Classical fixed-step RK4 with `substeps` internal steps per output sample.
/// Output has n_steps samples including the initial state. Throws
/// ComputeError naming the step index if the state leaves the finite range.
Trajectory simulate(const SystemParams& params, const State& initial, double dt,
                    std::size_t n_steps, std::size_t substeps = 10);

/// RK4 over an arbitrary callable field; shared by simulate and tests.
using DerivFn = std::function<Vec(std::span<const double>)>;
Vec rk4_step(const DerivFn& f, std::span<const double> state, double h);

}  // namespace nsv::systems

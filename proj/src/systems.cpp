#include "nsv/systems.hpp"

#include <cmath>

#include "nsv/eig.hpp"
#include "nsv/rng.hpp"

namespace nsv::systems {

namespace {

void require_positive(double x, const char* field) {
    if (!(x > 0.0) || !std::isfinite(x))
        throw ValidationError(std::string("parameter '") + field + "' must be positive, got " +
                              format_double(x));
}

}  // namespace

void SpringMassParams::validate() const {
    require_positive(mass, "mass");
    require_positive(spring, "spring");
}

void PendulumParams::validate() const {
    require_positive(mass, "mass");
    require_positive(length, "length");
    require_positive(gravity, "gravity");
}

void DoublePendulumParams::validate() const {
    require_positive(m1, "m1");
    require_positive(m2, "m2");
    require_positive(L1, "L1");
    require_positive(L2, "L2");
    require_positive(W1, "W1");
    require_positive(W2, "W2");
    require_positive(gravity, "gravity");
}

void HopfParams::validate() const {
    require_positive(radial, "radial");
    require_positive(omega, "omega");
    if (!std::isfinite(mu)) throw ValidationError("parameter 'mu' must be finite");
}

std::size_t state_dim(const SystemParams& params) {
    return std::visit(
        [](const auto& p) -> std::size_t {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, DoublePendulumParams>)
                return 4;
            else if constexpr (std::is_same_v<T, HopfParams>)
                return 3;
            else
                return 2;
        },
        params);
}

std::string system_name(const SystemParams& params) {
    return std::visit(
        [](const auto& p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SpringMassParams>) return "spring_mass";
            if constexpr (std::is_same_v<T, PendulumParams>) return "single_pendulum";
            if constexpr (std::is_same_v<T, DoublePendulumParams>) return "double_pendulum";
            if constexpr (std::is_same_v<T, HopfParams>) return "hopf";
        },
        params);
}

void validate(const SystemParams& params) {
    std::visit([](const auto& p) { p.validate(); }, params);
}

SystemParams params_from_name(const std::string& name) {
    if (name == "spring_mass") return SpringMassParams{};
    if (name == "single_pendulum") return PendulumParams{};
    if (name == "double_pendulum") return DoublePendulumParams{};
    if (name == "hopf") return HopfParams{};
    throw ValidationError("unknown system '" + name + "'");
}

void Trajectory::validate() const {
    if (states.size() < 2) throw ValidationError("trajectory must hold at least 2 samples");
    if (!(dt > 0.0)) throw ValidationError("trajectory dt must be positive");
    for (const State& s : states)
        if (!all_finite(s.values)) throw ValidationError("trajectory contains non-finite state");
}

void AmplitudeRange::validate(std::size_t dim) const {
    if (lo.size() != dim || hi.size() != dim)
        throw ValidationError("amplitude range size does not match state dimension " +
                              std::to_string(dim));
    for (std::size_t i = 0; i < dim; ++i)
        if (!(lo[i] <= hi[i]))
            throw ValidationError("amplitude range is empty in dimension " + std::to_string(i));
}

Vec spring_mass_deriv(std::span<const double> state, const SpringMassParams& p) {
    check_dim(state, 2, "spring_mass state");
    return {state[1], -(p.spring / p.mass) * state[0]};
}

Vec single_pendulum_deriv(std::span<const double> state, const PendulumParams& p) {
    check_dim(state, 2, "single_pendulum state");
    return {state[1], -(3.0 * p.gravity / (2.0 * p.length)) * std::sin(state[0])};
}

Vec double_pendulum_deriv(std::span<const double> state, const DoublePendulumParams& p) {
    check_dim(state, 4, "double_pendulum state");
    const double th1 = state[0], th2 = state[1], w1 = state[2], w2 = state[3];
    const double c = std::cos(th1 - th2), s = std::sin(th1 - th2);

    const double m00 = 0.25 * p.m1 * p.L1 * p.L1 + p.m2 * p.L1 * p.L1 + p.I1();
    const double m01 = 0.5 * p.m2 * p.L1 * p.L2 * c;
    const double m11 = 0.25 * p.m2 * p.L2 * p.L2 + p.I2();

    const double r0 =
        -0.5 * p.m2 * p.L1 * p.L2 * s * w2 * w2 - (0.5 * p.m1 + p.m2) * p.gravity * p.L1 * std::sin(th1);
    const double r1 = 0.5 * p.m2 * p.L1 * p.L2 * s * w1 * w1 - 0.5 * p.m2 * p.gravity * p.L2 * std::sin(th2);

    const double det = m00 * m11 - m01 * m01;
    const double cond = (std::abs(m00) + std::abs(m01)) * (std::abs(m11) + std::abs(m01)) / std::abs(det);
    if (!std::isfinite(cond) || cond > 1e12)
        throw ComputeError("double pendulum mass matrix is numerically singular");

    return {w1, w2, (m11 * r0 - m01 * r1) / det, (m00 * r1 - m01 * r0) / det};
}

double double_pendulum_energy(std::span<const double> state, const DoublePendulumParams& p) {
    check_dim(state, 4, "double_pendulum state");
    const double th1 = state[0], th2 = state[1], w1 = state[2], w2 = state[3];
    const double kinetic = 0.5 * (0.25 * p.m1 * p.L1 * p.L1 + p.m2 * p.L1 * p.L1 + p.I1()) * w1 * w1 +
                           0.5 * (0.25 * p.m2 * p.L2 * p.L2 + p.I2()) * w2 * w2 +
                           0.5 * p.m2 * p.L1 * p.L2 * w1 * w2 * std::cos(th1 - th2);
    const double potential = -(0.5 * p.m1 + p.m2) * p.gravity * p.L1 * std::cos(th1) -
                             0.5 * p.m2 * p.gravity * p.L2 * std::cos(th2);
    return kinetic + potential;
}

Vec hopf_deriv(std::span<const double> state, const HopfParams& p) {
    check_dim(state, 3, "hopf state");
    const double x = state[0], y = state[1], z = state[2];
    const double r2 = x * x + y * y;
    return {p.mu * x - p.omega * y - p.radial * x * r2,
            p.omega * x + p.mu * y - p.radial * y * r2, -z};
}

Vec system_deriv(const SystemParams& params, std::span<const double> state) {
    return std::visit(
        [&](const auto& p) -> Vec {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SpringMassParams>) return spring_mass_deriv(state, p);
            if constexpr (std::is_same_v<T, PendulumParams>) return single_pendulum_deriv(state, p);
            if constexpr (std::is_same_v<T, DoublePendulumParams>)
                return double_pendulum_deriv(state, p);
            if constexpr (std::is_same_v<T, HopfParams>) return hopf_deriv(state, p);
        },
        params);
}

Vec linear_frequencies(const SystemParams& params) {
    if (const auto* p = std::get_if<SpringMassParams>(&params))
        return {std::sqrt(p->spring / p->mass)};
    if (const auto* p = std::get_if<PendulumParams>(&params))
        return {std::sqrt(3.0 * p->gravity / (2.0 * p->length))};
    if (const auto* p = std::get_if<HopfParams>(&params)) return {p->omega};

    // Double pendulum: central finite differences of the nonlinear derivative
    // at the origin, then the positive imaginary parts of the eigenvalues.
    const auto& p = std::get<DoublePendulumParams>(params);
    const double h = 1e-6;
    Mat jac(4, 4);
    for (std::size_t j = 0; j < 4; ++j) {
        Vec plus(4, 0.0), minus(4, 0.0);
        plus[j] = h;
        minus[j] = -h;
        Vec fp = double_pendulum_deriv(plus, p);
        Vec fm = double_pendulum_deriv(minus, p);
        for (std::size_t i = 0; i < 4; ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * h);
    }
    auto eigs = eig::eigenvalues_small(jac);
    Vec freqs;
    for (const auto& lambda : eigs)
        if (lambda.imag() > 1e-9) freqs.push_back(lambda.imag());
    std::sort(freqs.begin(), freqs.end(), std::greater<>());
    return freqs;
}

State sample_initial_state(const SystemParams& params, std::uint64_t seed,
                           const AmplitudeRange& range) {
    const std::size_t dim = state_dim(params);
    range.validate(dim);
    Rng rng(seed);
    State s;
    s.values.resize(dim);
    for (std::size_t i = 0; i < dim; ++i)
        s.values[i] = range.lo[i] == range.hi[i] ? range.lo[i] : rng.uniform(range.lo[i], range.hi[i]);
    return s;
}

Vec rk4_step(const DerivFn& f, std::span<const double> state, double h) {
    const std::size_t n = state.size();
    Vec k1 = f(state);
    Vec tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k1[i];
    Vec k2 = f(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k2[i];
    Vec k3 = f(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + h * k3[i];
    Vec k4 = f(tmp);
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

Trajectory simulate(const SystemParams& params, const State& initial, double dt,
                    std::size_t n_steps, std::size_t substeps) {
    validate(params);
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (n_steps < 2) throw ValidationError("n_steps must be at least 2");
    if (substeps < 1) throw ValidationError("substeps must be at least 1");
    check_dim(initial.values, state_dim(params), "initial state");

    DerivFn f = [&](std::span<const double> s) { return system_deriv(params, s); };
    const double h = dt / static_cast<double>(substeps);

    Trajectory traj;
    traj.dt = dt;
    traj.system = system_name(params);
    traj.states.reserve(n_steps);
    traj.states.push_back({initial.values, initial.t});

    Vec current = initial.values;
    for (std::size_t step = 1; step < n_steps; ++step) {
        for (std::size_t sub = 0; sub < substeps; ++sub) {
            current = rk4_step(f, current, h);
            if (!all_finite(current))
                throw ComputeError("integration diverged at output step " + std::to_string(step));
        }
        traj.states.push_back({current, initial.t + static_cast<double>(step) * dt});
    }
    return traj;
}

}  // namespace nsv::systems

#include "nsv/lift.hpp"

#include <cmath>

#include "nsv/rng.hpp"

namespace nsv::lift {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

/// Gram-Schmidt orthonormalization of the columns; returns false if a column
/// degenerates (numerical rank < d_in).
bool orthonormalize_columns(Mat& a) {
    for (std::size_t c = 0; c < a.cols; ++c) {
        for (std::size_t prev = 0; prev < c; ++prev) {
            double proj = 0.0;
            for (std::size_t r = 0; r < a.rows; ++r) proj += a(r, c) * a(r, prev);
            for (std::size_t r = 0; r < a.rows; ++r) a(r, c) -= proj * a(r, prev);
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < a.rows; ++r) norm += a(r, c) * a(r, c);
        norm = std::sqrt(norm);
        if (norm < 1e-8) return false;
        for (std::size_t r = 0; r < a.rows; ++r) a(r, c) /= norm;
    }
    return true;
}

}  // namespace

LiftParams make_lift(std::size_t d_in, std::size_t D, std::uint64_t seed) {
    if (d_in < 1) throw ValidationError("lift input dimension must be >= 1");
    if (D < 2 * d_in)
        throw ValidationError("lift output dimension " + std::to_string(D) +
                              " must be at least 2 * d_in = " + std::to_string(2 * d_in));

    LiftParams lift;
    lift.d_in = d_in;
    lift.D = D;
    lift.seed = seed;

    Rng rng(derive_seed(seed, "lift.Wb"));
    lift.W = Mat(D, d_in);
    for (double& v : lift.W.a) v = rng.uniform(-2.0, 2.0);
    lift.b.resize(D);
    for (double& v : lift.b) v = rng.uniform(0.0, kTwoPi);

    for (std::uint64_t attempt = 0; attempt < 8; ++attempt) {
        Rng arng(derive_seed(seed, "lift.A", attempt));
        Mat a(D, d_in);
        for (double& v : a.a) v = arng.normal();
        if (orthonormalize_columns(a)) {
            lift.A = std::move(a);
            return lift;
        }
    }
    throw ComputeError("lift skip matrix is rank deficient after 8 sampling attempts");
}

Vec apply_lift(const LiftParams& lift, std::span<const double> s) {
    check_dim(s, lift.d_in, "lift input");
    Vec out(lift.D);
    for (std::size_t r = 0; r < lift.D; ++r) {
        double lin = 0.0, phase = lift.b[r];
        for (std::size_t c = 0; c < lift.d_in; ++c) {
            lin += lift.A(r, c) * s[c];
            phase += lift.W(r, c) * s[c];
        }
        out[r] = lin + std::sin(phase);
    }
    return out;
}

std::vector<std::size_t> angle_indices(const systems::SystemParams& params) {
    if (std::holds_alternative<systems::PendulumParams>(params)) return {0};
    if (std::holds_alternative<systems::DoublePendulumParams>(params)) return {0, 1};
    return {};
}

std::size_t lift_input_dim(const systems::SystemParams& params, bool angle_wrap) {
    std::size_t dim = systems::state_dim(params);
    if (angle_wrap) dim += angle_indices(params).size();
    return dim;
}

Vec lift_input(const systems::SystemParams& params, std::span<const double> state,
               bool angle_wrap, std::span<const double> input_scale) {
    check_dim(state, systems::state_dim(params), "state");
    Vec out;
    if (!angle_wrap) {
        out.assign(state.begin(), state.end());
    } else {
        auto angles = angle_indices(params);
        out.reserve(state.size() + angles.size());
        for (std::size_t i = 0; i < state.size(); ++i) {
            bool is_angle = std::find(angles.begin(), angles.end(), i) != angles.end();
            if (is_angle) {
                out.push_back(std::sin(state[i]));
                out.push_back(std::cos(state[i]));
            } else {
                out.push_back(state[i]);
            }
        }
    }
    if (!input_scale.empty()) {
        check_dim(input_scale, out.size(), "lift input scale");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] /= input_scale[i];
    }
    return out;
}

void DatasetConfig::validate() const {
    systems::validate(params);
    range.validate(systems::state_dim(params));
    if (observation_dim < 2 * lift_input_dim(params, angle_wrap))
        throw ValidationError("observation_dim too small for injectivity headroom");
    if (seq_len < 2) throw ValidationError("seq_len must be at least 2");
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw ValidationError("all split sizes must be positive");
    if (!input_scale.empty() && input_scale.size() != lift_input_dim(params, angle_wrap))
        throw ValidationError("input_scale length does not match lift input dimension");
    for (double s : input_scale)
        if (!(s > 0.0)) throw ValidationError("input_scale entries must be positive");
}

Vec DatasetConfig::effective_scale() const {
    if (!input_scale.empty()) return input_scale;
    return Vec(lift_input_dim(params, angle_wrap), 1.0);
}

const std::vector<LatentSeries>& Dataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw ValidationError("unknown split '" + name + "'");
}

Dataset build_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.cfg = cfg;
    ds.lift = make_lift(lift_input_dim(cfg.params, cfg.angle_wrap), cfg.observation_dim,
                        derive_seed(cfg.seed, "lift.params"));
    const Vec scale = cfg.effective_scale();

    auto make_series = [&](std::size_t index) {
        const std::uint64_t traj_seed = derive_seed(cfg.seed, "dataset.sequence", index);
        systems::State init =
            systems::sample_initial_state(cfg.params, traj_seed, cfg.range);
        systems::Trajectory traj =
            systems::simulate(cfg.params, init, cfg.dt, cfg.seq_len, cfg.substeps);
        LatentSeries series;
        series.dt = cfg.dt;
        series.system = systems::system_name(cfg.params);
        series.lift_seed = ds.lift.seed;
        series.trajectory_seed = traj_seed;
        series.seq_index = index;
        series.observations.reserve(traj.size());
        for (const systems::State& s : traj.states)
            series.observations.push_back(
                apply_lift(ds.lift, lift_input(cfg.params, s.values, cfg.angle_wrap, scale)));
        return series;
    };

    std::size_t index = 0;
    for (std::size_t i = 0; i < cfg.n_train; ++i) ds.train.push_back(make_series(index++));
    for (std::size_t i = 0; i < cfg.n_val; ++i) ds.val.push_back(make_series(index++));
    for (std::size_t i = 0; i < cfg.n_test; ++i) ds.test.push_back(make_series(index++));
    return ds;
}

systems::Trajectory resimulate(const DatasetConfig& cfg, const LatentSeries& series) {
    systems::State init =
        systems::sample_initial_state(cfg.params, series.trajectory_seed, cfg.range);
    return systems::simulate(cfg.params, init, cfg.dt, cfg.seq_len, cfg.substeps);
}

}  // namespace nsv::lift

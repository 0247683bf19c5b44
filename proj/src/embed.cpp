#include "nsv/embed.hpp"

#include <algorithm>
#include <cmath>

#include "nsv/rng.hpp"

namespace nsv::embed {

std::string distance_mode_name(DistanceMode m) { return m == DistanceMode::box ? "box" : "torus"; }

DistanceMode distance_mode_from_name(const std::string& name) {
    if (name == "box") return DistanceMode::box;
    if (name == "torus") return DistanceMode::torus;
    throw ValidationError("unknown distance mode '" + name + "'");
}

void BetaSchedule::validate() const {
    if (cycle < 1) throw ValidationError("beta cycle must be >= 1");
    if (zero_frac < 0 || ramp_frac < 0 || hold_frac < 0)
        throw ValidationError("beta schedule fractions must be nonnegative");
    if (zero_frac + ramp_frac + hold_frac > 1.0 + 1e-12)
        throw ValidationError("beta schedule fractions must sum to at most 1");
}

double beta_schedule(std::size_t step, const BetaSchedule& schedule) {
    schedule.validate();
    const double pos =
        static_cast<double>(step % schedule.cycle) / static_cast<double>(schedule.cycle);
    if (pos < schedule.zero_frac) return 0.0;
    if (schedule.ramp_frac > 0.0 && pos < schedule.zero_frac + schedule.ramp_frac)
        return (pos - schedule.zero_frac) / schedule.ramp_frac;
    return 1.0;
}

void EmbedConfig::validate() const {
    if (d < 1) throw ValidationError("embed dimension d must be >= 1");
    if (w_reconstruct < 0 || w_smooth < 0 || w_space < 0)
        throw ValidationError("loss weights must be nonnegative");
    if (L0 < 0) throw ValidationError("L0 must be positive (or 0 for the default)");
    if (eta != 0 && eta != 1) throw ValidationError("eta must be 0 or 1");
    beta.validate();
    sinkhorn.validate();
    if (batch < 1 || steps < 1) throw ValidationError("batch and steps must be >= 1");
}

double EmbedConfig::effective_l0(std::size_t seq_len) const {
    if (L0 > 0.0) return L0;
    // sized so a trajectory crossing the domain diameter within one sequence
    // stays hinge-feasible
    return 2.0 * std::sqrt(static_cast<double>(d)) / static_cast<double>(std::max<std::size_t>(seq_len, 2));
}

Vec Standardization::apply(std::span<const double> x) const {
    check_dim(x, mean.size(), "standardization input");
    Vec z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean[i]) / stdev[i];
    return z;
}

Vec Standardization::invert(std::span<const double> z) const {
    check_dim(z, mean.size(), "standardization input");
    Vec x(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] * stdev[i] + mean[i];
    return x;
}

Standardization fit_standardization(const std::vector<lift::LatentSeries>& train) {
    if (train.empty() || train[0].observations.empty())
        throw ValidationError("cannot fit standardization on an empty split");
    const std::size_t dim = train[0].observations[0].size();
    Standardization st;
    st.mean.assign(dim, 0.0);
    st.stdev.assign(dim, 0.0);
    std::size_t count = 0;
    for (const auto& series : train)
        for (const Vec& obs : series.observations) {
            check_dim(obs, dim, "observation");
            for (std::size_t i = 0; i < dim; ++i) st.mean[i] += obs[i];
            ++count;
        }
    for (double& m : st.mean) m /= static_cast<double>(count);
    for (const auto& series : train)
        for (const Vec& obs : series.observations)
            for (std::size_t i = 0; i < dim; ++i) {
                const double d = obs[i] - st.mean[i];
                st.stdev[i] += d * d;
            }
    for (double& s : st.stdev) s = std::max(std::sqrt(s / static_cast<double>(count)), 1e-12);
    return st;
}

EmbeddingModel init_embedding(std::size_t obs_dim, const EmbedConfig& cfg) {
    cfg.validate();
    using nn::Activation;
    std::vector<nn::LayerSpec> enc{{obs_dim, 128, Activation::sine},
                                   {128, 64, Activation::sine},
                                   {64, 32, Activation::sine},
                                   {32, cfg.d, Activation::sine}};
    std::vector<nn::LayerSpec> dec{{cfg.d, 32, Activation::sine},
                                   {32, 64, Activation::sine},
                                   {64, 128, Activation::sine},
                                   {128, obs_dim, Activation::none}};
    nn::InitOptions opts{.omega0 = cfg.omega0, .sine_scale = cfg.sine_scale};
    EmbeddingModel model;
    model.encoder = nn::init_mlp(enc, derive_seed(cfg.seed, "embed.encoder"), opts);
    model.decoder = nn::init_mlp(dec, derive_seed(cfg.seed, "embed.decoder"), opts);
    model.d = cfg.d;
    model.obs_dim = obs_dim;
    return model;
}

namespace {

void assert_bounded(const Vec& v) {
    for (double x : v)
        if (!(std::abs(x) <= 1.0))
            throw ComputeError("encoder output left [-1,1]: " + format_double(x));
}

}  // namespace

Vec encode(const EmbeddingModel& model, std::span<const double> observation) {
    Vec v = nn::forward(model.encoder, model.standardization.apply(observation));
    assert_bounded(v);
    return v;
}

Vec decode(const EmbeddingModel& model, std::span<const double> v) {
    check_dim(v, model.d, "neural state variable");
    return model.standardization.invert(nn::forward(model.decoder, v));
}

double nsv_distance(std::span<const double> a, std::span<const double> b, DistanceMode mode) {
    check_dim(b, a.size(), "nsv_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        if (mode == DistanceMode::torus) d -= 2.0 * std::nearbyint(d / 2.0);
        s += d * d;
    }
    return std::sqrt(s);
}

double smoothness_loss(std::span<const double> v0, std::span<const double> v1,
                       std::span<const double> v2, double l0, int eta, DistanceMode mode) {
    const double far = nsv_distance(v2, v0, mode);
    const double near = nsv_distance(v1, v0, mode);
    return std::max(0.0, far - 2.0 * l0) + (eta != 0 ? std::max(0.0, near - l0) : 0.0);
}

namespace {

/// d(dist(a,b))/da, accumulated into ga and gb with the given weight.
void add_distance_grad(std::span<const double> a, std::span<const double> b, DistanceMode mode,
                       double weight, Vec& ga, Vec& gb) {
    Vec delta(a.size());
    double dist = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        if (mode == DistanceMode::torus) d -= 2.0 * std::nearbyint(d / 2.0);
        delta[i] = d;
        dist += d * d;
    }
    dist = std::sqrt(dist);
    if (dist <= 1e-300) return;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double g = weight * delta[i] / dist;
        ga[i] += g;
        gb[i] -= g;
    }
}

}  // namespace

LossBreakdown total_loss(const std::vector<Triplet>& batch, const EmbeddingModel& model,
                         double beta, double l0, const EmbedConfig& cfg,
                         std::uint64_t step_seed, nn::Gradients* enc_grads,
                         nn::Gradients* dec_grads) {
    if (batch.empty()) throw ValidationError("total_loss batch is empty");
    const std::size_t n_samples = batch.size() * 3;

    std::vector<Vec> std_obs(n_samples), encoded(n_samples);
    std::vector<nn::ForwardCache> enc_caches(n_samples), dec_caches(n_samples);
    std::vector<Vec> dvs(n_samples, Vec(model.d, 0.0));

    LossBreakdown out;

    // encode/decode every frame; reconstruction term
    for (std::size_t t = 0; t < batch.size(); ++t)
        for (std::size_t j = 0; j < 3; ++j) {
            const std::size_t idx = t * 3 + j;
            std_obs[idx] = model.standardization.apply(*batch[t][j]);
            encoded[idx] = nn::forward(model.encoder, std_obs[idx], &enc_caches[idx]);
            assert_bounded(encoded[idx]);
            Vec rec = nn::forward(model.decoder, encoded[idx], &dec_caches[idx]);
            Vec err(rec.size());
            double sse = 0.0;
            for (std::size_t i = 0; i < rec.size(); ++i) {
                err[i] = rec[i] - std_obs[idx][i];
                sse += err[i] * err[i];
            }
            out.reconstruct += sse / static_cast<double>(n_samples);
            if (dec_grads) {
                const double scale = 2.0 * cfg.w_reconstruct / static_cast<double>(n_samples);
                for (double& e : err) e *= scale;
                dvs[idx] = nn::backward(model.decoder, dec_caches[idx], err, dec_grads);
            }
        }

    // smoothness hinges per triplet
    const bool want_smooth = beta * cfg.w_smooth > 0.0;
    if (want_smooth) {
        const double per_triplet = 1.0 / static_cast<double>(batch.size());
        const double weight = beta * cfg.w_smooth * per_triplet;
        for (std::size_t t = 0; t < batch.size(); ++t) {
            const Vec& v0 = encoded[t * 3 + 0];
            const Vec& v1 = encoded[t * 3 + 1];
            const Vec& v2 = encoded[t * 3 + 2];
            out.smooth += smoothness_loss(v0, v1, v2, l0, cfg.eta, cfg.mode) * per_triplet;
            if (enc_grads) {
                if (nsv_distance(v2, v0, cfg.mode) > 2.0 * l0)
                    add_distance_grad(v2, v0, cfg.mode, weight, dvs[t * 3 + 2], dvs[t * 3 + 0]);
                if (cfg.eta != 0 && nsv_distance(v1, v0, cfg.mode) > l0)
                    add_distance_grad(v1, v0, cfg.mode, weight, dvs[t * 3 + 1], dvs[t * 3 + 0]);
            }
        }
    }

    // space-filling divergence on a capped subsample of the encoded cloud
    const bool want_space = beta * cfg.w_space > 0.0;
    if (want_space) {
        std::vector<std::size_t> chosen(n_samples);
        for (std::size_t i = 0; i < n_samples; ++i) chosen[i] = i;
        if (cfg.space_points > 0 && n_samples > cfg.space_points) {
            Rng rng(derive_seed(step_seed, "embed.space_subsample"));
            for (std::size_t i = 0; i < cfg.space_points; ++i)
                std::swap(chosen[i], chosen[i + rng.below(n_samples - i)]);
            chosen.resize(cfg.space_points);
        }
        std::vector<Vec> cloud;
        cloud.reserve(chosen.size());
        for (std::size_t idx : chosen) cloud.push_back(encoded[idx]);
        auto reference = transport::uniform_reference(
            model.d, cloud.size(), derive_seed(step_seed, "embed.reference"));
        auto sink = transport::sinkhorn_divergence(cloud, reference, cfg.sinkhorn);
        out.space = sink.value;
        if (enc_grads) {
            const double weight = beta * cfg.w_space;
            for (std::size_t i = 0; i < chosen.size(); ++i)
                for (std::size_t k = 0; k < model.d; ++k)
                    dvs[chosen[i]][k] += weight * sink.grad_a[i][k];
        }
    }

    if (enc_grads)
        for (std::size_t idx = 0; idx < n_samples; ++idx)
            nn::backward(model.encoder, enc_caches[idx], dvs[idx], enc_grads);

    out.total = cfg.w_reconstruct * out.reconstruct +
                beta * (cfg.w_smooth * out.smooth + cfg.w_space * out.space);
    return out;
}

double reconstruction_mse(const EmbeddingModel& model,
                          const std::vector<lift::LatentSeries>& split) {
    double sse = 0.0;
    std::size_t count = 0;
    for (const auto& series : split)
        for (const Vec& obs : series.observations) {
            Vec z = model.standardization.apply(obs);
            Vec rec = nn::forward(model.decoder, nn::forward(model.encoder, z));
            for (std::size_t i = 0; i < z.size(); ++i) {
                const double e = rec[i] - z[i];
                sse += e * e;
            }
            ++count;
        }
    if (count == 0) throw ValidationError("reconstruction_mse on empty split");
    return sse / static_cast<double>(count);
}

EmbeddingModel train_embedding(const lift::Dataset& dataset, const EmbedConfig& cfg,
                               TrainingReport* report) {
    cfg.validate();
    if (dataset.train.empty()) throw ValidationError("train split is empty");
    const std::size_t seq_len = dataset.train[0].observations.size();
    if (seq_len < 3)
        throw ValidationError("embed training needs sequences of length >= 3 for triplets");

    EmbeddingModel model = init_embedding(dataset.cfg.observation_dim, cfg);
    model.standardization = fit_standardization(dataset.train);
    const double l0 = cfg.effective_l0(seq_len);

    nn::AdamState enc_opt = nn::AdamState::init(model.encoder, cfg.adam);
    nn::AdamState dec_opt = nn::AdamState::init(model.decoder, cfg.adam);

    TrainingReport local;
    TrainingReport& rep = report ? *report : local;
    rep.rows.clear();
    rep.val_history.clear();
    rep.status = "ok";

    EmbeddingModel best = model;
    double best_val = reconstruction_mse(model, dataset.val);
    std::size_t best_step = 0;
    rep.val_history.emplace_back(0, best_val);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const double beta = beta_schedule(step, cfg.beta);
        Rng batch_rng(derive_seed(cfg.seed, "embed.batch", step));
        std::vector<Triplet> batch;
        batch.reserve(cfg.batch);
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            const auto& series = dataset.train[batch_rng.below(dataset.train.size())];
            const std::size_t t = batch_rng.below(series.observations.size() - 2);
            batch.push_back(Triplet{&series.observations[t], &series.observations[t + 1],
                                    &series.observations[t + 2]});
        }

        nn::Gradients enc_g = nn::Gradients::zeros_like(model.encoder);
        nn::Gradients dec_g = nn::Gradients::zeros_like(model.decoder);
        LossBreakdown loss = total_loss(batch, model, beta, l0, cfg,
                                        derive_seed(cfg.seed, "embed.step", step), &enc_g, &dec_g);
        rep.rows.push_back({step, loss.total, loss.reconstruct, loss.smooth, loss.space, beta});

        if (!std::isfinite(loss.total)) {
            rep.status = "nan_abort";
            log_warn("embed training hit a non-finite loss at step " + std::to_string(step) +
                     "; keeping best checkpoint from step " + std::to_string(best_step));
            break;
        }

        nn::adam_step(model.encoder, enc_g, enc_opt);
        nn::adam_step(model.decoder, dec_g, dec_opt);

        if ((step + 1) % cfg.val_interval == 0 || step + 1 == cfg.steps) {
            const double val = reconstruction_mse(model, dataset.val);
            rep.val_history.emplace_back(step + 1, val);
            if (val < best_val) {
                best_val = val;
                best = model;
                best_step = step + 1;
            }
        }
    }

    rep.best_val = best_val;
    rep.best_step = best_step;
    return best;
}

NsvTrajectory encode_series(const EmbeddingModel& model, const lift::LatentSeries& series) {
    NsvTrajectory traj;
    traj.dt = series.dt;
    traj.system = series.system;
    traj.trajectory_seed = series.trajectory_seed;
    traj.seq_index = series.seq_index;
    traj.states.reserve(series.observations.size());
    for (const Vec& obs : series.observations) traj.states.push_back(encode(model, obs));
    return traj;
}

std::vector<NsvTrajectory> encode_split(const EmbeddingModel& model,
                                        const std::vector<lift::LatentSeries>& split) {
    std::vector<NsvTrajectory> out;
    out.reserve(split.size());
    for (const auto& series : split) out.push_back(encode_series(model, series));
    return out;
}

}  // namespace nsv::embed

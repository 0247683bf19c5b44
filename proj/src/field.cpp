#include "nsv/field.hpp"

#include <algorithm>
#include <cmath>

#include "nsv/rng.hpp"

namespace nsv::field {

std::vector<nn::LayerSpec> field_architecture(std::size_t d) {
    using nn::Activation;
    if (d < 1) throw ValidationError("field dimension must be >= 1");
    if (d <= 2)
        return {{d, 32, Activation::relu},  {32, 64, Activation::relu},
                {64, 128, Activation::relu}, {128, 64, Activation::relu},
                {64, 32, Activation::relu},  {32, d, Activation::none}};
    return {{d, 32, Activation::relu},   {32, 64, Activation::relu},
            {64, 128, Activation::relu}, {128, 256, Activation::relu},
            {256, 128, Activation::relu}, {128, 64, Activation::relu},
            {64, 32, Activation::relu},  {32, d, Activation::none}};
}

FieldModel init_field(std::size_t d, std::uint64_t seed) {
    FieldModel model;
    model.net = nn::init_mlp(field_architecture(d), derive_seed(seed, "field.init"));
    model.d = d;
    return model;
}

Vec eval_field(const FieldModel& model, std::span<const double> v) {
    check_dim(v, model.d, "field input");
    return nn::forward(model.net, v);
}

namespace {

Vec rk4_step_fn(const FieldFn& f, std::span<const double> v, double h) {
    const std::size_t n = v.size();
    Vec k1 = f(v);
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = v[i] + 0.5 * h * k1[i];
    Vec k2 = f(x);
    for (std::size_t i = 0; i < n; ++i) x[i] = v[i] + 0.5 * h * k2[i];
    Vec k3 = f(x);
    for (std::size_t i = 0; i < n; ++i) x[i] = v[i] + h * k3[i];
    Vec k4 = f(x);
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = v[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

}  // namespace

NsvTrajectory integrate(const FieldFn& f, std::span<const double> v0, double dt,
                        std::size_t n_steps, std::size_t substeps) {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (n_steps < 1) throw ValidationError("n_steps must be >= 1");
    if (substeps < 1) throw ValidationError("substeps must be >= 1");

    NsvTrajectory traj;
    traj.dt = dt;
    traj.states.reserve(n_steps);
    traj.states.emplace_back(v0.begin(), v0.end());
    const double h = dt / static_cast<double>(substeps);
    Vec cur(v0.begin(), v0.end());
    for (std::size_t step = 1; step < n_steps; ++step) {
        for (std::size_t sub = 0; sub < substeps; ++sub) {
            cur = rk4_step_fn(f, cur, h);
            if (!all_finite(cur))
                throw ComputeError("field integration diverged at output step " +
                                   std::to_string(step));
        }
        traj.states.push_back(cur);
    }
    return traj;
}

NsvTrajectory integrate(const FieldModel& model, std::span<const double> v0, double dt,
                        std::size_t n_steps, std::size_t substeps) {
    return integrate([&](std::span<const double> v) { return eval_field(model, v); }, v0, dt,
                     n_steps, substeps);
}

FilterResult filter_trajectories(const std::vector<NsvTrajectory>& trajectories,
                                 double percentile) {
    if (trajectories.empty()) throw ValidationError("filter_trajectories on empty set");
    if (!(percentile > 0.0) || percentile > 100.0)
        throw ValidationError("percentile must be in (0, 100]");

    Vec steps;
    for (const auto& traj : trajectories)
        for (std::size_t i = 0; i + 1 < traj.states.size(); ++i)
            steps.push_back(dist2(traj.states[i + 1], traj.states[i]));
    if (steps.empty()) throw ValidationError("trajectories contain no steps");

    std::sort(steps.begin(), steps.end());
    FilterResult out;
    if (percentile >= 100.0) {
        out.threshold = steps.back();
        out.kept = trajectories;
        return out;
    }
    // nearest-rank percentile
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(percentile / 100.0 * static_cast<double>(steps.size())));
    out.threshold = steps[std::min(steps.size() - 1, std::max<std::size_t>(rank, 1) - 1)];

    for (std::size_t k = 0; k < trajectories.size(); ++k) {
        const auto& traj = trajectories[k];
        bool keep = true;
        for (std::size_t i = 0; i + 1 < traj.states.size() && keep; ++i)
            if (dist2(traj.states[i + 1], traj.states[i]) > out.threshold) keep = false;
        if (keep)
            out.kept.push_back(traj);
        else
            out.removed_indices.push_back(k);
    }
    if (out.kept.empty())
        throw ComputeError("trajectory filtering removed every trajectory; embedding unusable");
    return out;
}

double rho_schedule(std::size_t step, const RhoSchedule& schedule) {
    if (schedule.cycle < 1) throw ValidationError("rho cycle must be >= 1");
    if (!(schedule.lo > 0.0) || !(schedule.hi < 1.0) || schedule.lo > schedule.hi)
        throw ValidationError("rho schedule needs 0 < lo <= hi < 1");
    if (schedule.cycle == 1) return schedule.lo;
    const double pos = static_cast<double>(step % schedule.cycle) /
                       static_cast<double>(schedule.cycle - 1);
    return schedule.lo + (schedule.hi - schedule.lo) * pos;
}

std::string train_mode_name(TrainMode m) {
    return m == TrainMode::integrated ? "integrated" : "finite-difference";
}

TrainMode train_mode_from_name(const std::string& name) {
    if (name == "integrated") return TrainMode::integrated;
    if (name == "finite-difference" || name == "finite_difference")
        return TrainMode::finite_difference;
    throw ValidationError("unknown field training mode '" + name + "'");
}

void FieldTrainConfig::validate() const {
    if (substeps < 1) throw ValidationError("substeps must be >= 1");
    if (!(percentile > 0.0) || percentile > 100.0)
        throw ValidationError("percentile must be in (0, 100]");
    if (batch < 1 || steps < 1) throw ValidationError("batch and steps must be >= 1");
    rho_schedule(0, rho);
}

namespace {

struct Rk4Tape {
    // four forward caches and the entry state per substep
    std::vector<std::array<nn::ForwardCache, 4>> caches;
    std::vector<Vec> entry_states;
    std::vector<std::array<Vec, 4>> ks;
};

Vec rk4_net_step(const FieldModel& model, const Vec& v, double h, Rk4Tape* tape) {
    const std::size_t n = v.size();
    std::array<nn::ForwardCache, 4> caches;
    std::array<Vec, 4> ks;
    ks[0] = nn::forward(model.net, v, tape ? &caches[0] : nullptr);
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = v[i] + 0.5 * h * ks[0][i];
    ks[1] = nn::forward(model.net, x, tape ? &caches[1] : nullptr);
    for (std::size_t i = 0; i < n; ++i) x[i] = v[i] + 0.5 * h * ks[1][i];
    ks[2] = nn::forward(model.net, x, tape ? &caches[2] : nullptr);
    for (std::size_t i = 0; i < n; ++i) x[i] = v[i] + h * ks[2][i];
    ks[3] = nn::forward(model.net, x, tape ? &caches[3] : nullptr);
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = v[i] + h / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i]);
    if (tape) {
        tape->caches.push_back(std::move(caches));
        tape->entry_states.push_back(v);
        tape->ks.push_back(std::move(ks));
    }
    return out;
}

/// Adjoint of one recorded RK4 substep: maps d(loss)/d(v_out) to
/// d(loss)/d(v_in), accumulating parameter gradients.
Vec rk4_net_step_adjoint(const FieldModel& model, const Rk4Tape& tape, std::size_t idx, double h,
                         const Vec& out_bar, nn::Gradients* grads) {
    const std::size_t n = out_bar.size();
    const auto& caches = tape.caches[idx];

    Vec v_bar = out_bar;

    Vec k4_bar(n), k3_bar(n), k2_bar(n), k1_bar(n);
    for (std::size_t i = 0; i < n; ++i) k4_bar[i] = h / 6.0 * out_bar[i];
    Vec x4_bar = nn::backward(model.net, caches[3], k4_bar, grads);
    for (std::size_t i = 0; i < n; ++i) {
        v_bar[i] += x4_bar[i];
        k3_bar[i] = h / 3.0 * out_bar[i] + h * x4_bar[i];
    }
    Vec x3_bar = nn::backward(model.net, caches[2], k3_bar, grads);
    for (std::size_t i = 0; i < n; ++i) {
        v_bar[i] += x3_bar[i];
        k2_bar[i] = h / 3.0 * out_bar[i] + 0.5 * h * x3_bar[i];
    }
    Vec x2_bar = nn::backward(model.net, caches[1], k2_bar, grads);
    for (std::size_t i = 0; i < n; ++i) {
        v_bar[i] += x2_bar[i];
        k1_bar[i] = h / 6.0 * out_bar[i] + 0.5 * h * x2_bar[i];
    }
    Vec x1_bar = nn::backward(model.net, caches[0], k1_bar, grads);
    for (std::size_t i = 0; i < n; ++i) v_bar[i] += x1_bar[i];
    return v_bar;
}

/// Loss contribution of one start index m: integrate forward to the horizon,
/// apply normalized geometric weights, then run the adjoint sweep backwards.
double segment_loss(const FieldModel& model, const NsvTrajectory& traj, std::size_t m,
                    std::size_t last, double rho, std::size_t substeps, double outer_weight,
                    nn::Gradients* grads) {
    const double dt = traj.dt;
    const double h = dt / static_cast<double>(substeps);
    const std::size_t n_pred = last - m;

    double weight_sum = 0.0;
    {
        double w = 1.0;
        for (std::size_t n = 0; n < n_pred; ++n, w *= rho) weight_sum += w;
    }

    Rk4Tape tape;
    std::vector<Vec> predicted(n_pred);
    Vec cur = traj.states[m];
    for (std::size_t step = 0; step < n_pred; ++step) {
        for (std::size_t sub = 0; sub < substeps; ++sub) {
            cur = rk4_net_step(model, cur, h, grads ? &tape : nullptr);
            if (!all_finite(cur))
                throw ComputeError("field training rollout diverged at step " +
                                   std::to_string(m + step + 1));
        }
        predicted[step] = cur;
    }

    double loss = 0.0;
    std::vector<Vec> bars(n_pred, Vec(model.d, 0.0));
    double w = 1.0;
    for (std::size_t stepi = 0; stepi < n_pred; ++stepi, w *= rho) {
        const Vec& target = traj.states[m + stepi + 1];
        Vec err(model.d);
        double distance = 0.0;
        for (std::size_t i = 0; i < model.d; ++i) {
            err[i] = predicted[stepi][i] - target[i];
            distance += err[i] * err[i];
        }
        distance = std::sqrt(distance);
        const double scaled = w / weight_sum;
        loss += scaled * distance;
        if (grads && distance > 1e-300)
            for (std::size_t i = 0; i < model.d; ++i)
                bars[stepi][i] = outer_weight * scaled * err[i] / distance;
    }

    if (grads) {
        Vec carry(model.d, 0.0);
        for (std::size_t stepi = n_pred; stepi-- > 0;) {
            for (std::size_t i = 0; i < model.d; ++i) carry[i] += bars[stepi][i];
            for (std::size_t sub = substeps; sub-- > 0;)
                carry = rk4_net_step_adjoint(model, tape, stepi * substeps + sub, h, carry, grads);
        }
    }
    return loss;
}

}  // namespace

double field_loss(const FieldModel& model, const std::vector<NsvTrajectory>& batch, double rho,
                  std::size_t substeps, nn::Gradients* grads) {
    if (batch.empty()) throw ValidationError("field_loss batch is empty");
    if (!(rho > 0.0) || !(rho < 1.0)) throw ValidationError("rho must satisfy 0 < rho < 1");
    for (const auto& traj : batch)
        if (traj.states.size() < 2)
            throw ValidationError("field_loss trajectories need length >= 2");

    const double per_traj = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& traj : batch) {
        const std::size_t n = traj.states.size();
        for (std::size_t m = 0; m + 1 < n; ++m)
            loss += per_traj *
                    segment_loss(model, traj, m, n - 1, rho, substeps, per_traj, grads);
    }
    return loss;
}

FieldModel train_field(const std::vector<NsvTrajectory>& train,
                       const std::vector<NsvTrajectory>& val, const FieldTrainConfig& cfg,
                       TrainingReport* report) {
    cfg.validate();
    if (train.empty()) throw ValidationError("field training set is empty");
    const std::size_t d = train[0].states[0].size();
    for (const auto& traj : train)
        if (traj.states.size() < 2) throw ValidationError("training trajectory shorter than 2");

    FieldModel model = init_field(d, cfg.seed);
    nn::AdamState opt = nn::AdamState::init(model.net, cfg.adam);

    TrainingReport local;
    TrainingReport& rep = report ? *report : local;
    rep.rows.clear();
    rep.val_history.clear();
    rep.status = "ok";

    const auto& val_set = val.empty() ? train : val;
    auto validate_model = [&](const FieldModel& m) {
        return rollout_error(m, val_set, cfg.val_horizon, cfg.substeps);
    };

    FieldModel best = model;
    double best_val = validate_model(model);
    std::size_t best_step = 0;
    rep.val_history.emplace_back(0, best_val);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const double rho = rho_schedule(step, cfg.rho);
        Rng rng(derive_seed(cfg.seed, "field.batch", step));
        nn::Gradients grads = nn::Gradients::zeros_like(model.net);
        double loss = 0.0;

        if (cfg.mode == TrainMode::integrated) {
            const double per_seg = 1.0 / static_cast<double>(cfg.batch);
            for (std::size_t b = 0; b < cfg.batch; ++b) {
                const auto& traj = train[rng.below(train.size())];
                const std::size_t n = traj.states.size();
                const std::size_t m = rng.below(n - 1);
                std::size_t last = n - 1;
                if (cfg.max_horizon > 0) last = std::min(last, m + cfg.max_horizon);
                loss += per_seg *
                        segment_loss(model, traj, m, last, rho, cfg.substeps, per_seg, &grads);
            }
        } else {
            // regress the field onto one-step difference quotients
            const double per_pair = 1.0 / static_cast<double>(cfg.batch);
            for (std::size_t b = 0; b < cfg.batch; ++b) {
                const auto& traj = train[rng.below(train.size())];
                const std::size_t n = traj.states.size();
                const std::size_t m = rng.below(n - 1);
                nn::ForwardCache cache;
                Vec f = nn::forward(model.net, traj.states[m], &cache);
                Vec err(d);
                double sse = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    const double target = (traj.states[m + 1][i] - traj.states[m][i]) / traj.dt;
                    err[i] = f[i] - target;
                    sse += err[i] * err[i];
                }
                loss += per_pair * sse;
                for (double& e : err) e *= 2.0 * per_pair;
                nn::backward(model.net, cache, err, &grads);
            }
        }

        rep.rows.push_back({step, loss, rho});
        if (!std::isfinite(loss)) {
            rep.status = "nan_abort";
            log_warn("field training hit a non-finite loss at step " + std::to_string(step));
            break;
        }
        nn::adam_step(model.net, grads, opt);

        if ((step + 1) % cfg.val_interval == 0 || step + 1 == cfg.steps) {
            const double v = validate_model(model);
            rep.val_history.emplace_back(step + 1, v);
            if (v < best_val) {
                best_val = v;
                best = model;
                best_step = step + 1;
            }
        }
    }

    rep.best_val = best_val;
    rep.best_step = best_step;
    return best;
}

double rollout_error(const FieldModel& model, const std::vector<NsvTrajectory>& trajectories,
                     std::size_t horizon, std::size_t substeps) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& traj : trajectories) {
        const std::size_t n = traj.states.size();
        if (n < 2) continue;
        const std::size_t steps = std::min<std::size_t>(horizon, n - 1);
        NsvTrajectory rollout;
        try {
            rollout = integrate(model, traj.states[0], traj.dt, steps + 1, substeps);
        } catch (const ComputeError&) {
            return std::numeric_limits<double>::infinity();
        }
        for (std::size_t i = 1; i <= steps; ++i) {
            total += dist2(rollout.states[i], traj.states[i]);
            ++count;
        }
    }
    if (count == 0) throw ValidationError("rollout_error needs at least one step");
    return total / static_cast<double>(count);
}

double single_step_error(const FieldModel& model, const std::vector<NsvTrajectory>& trajectories,
                         std::size_t substeps) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& traj : trajectories) {
        for (std::size_t i = 0; i + 1 < traj.states.size(); ++i) {
            NsvTrajectory one = integrate(model, traj.states[i], traj.dt, 2, substeps);
            total += dist2(one.states[1], traj.states[i + 1]);
            ++count;
        }
    }
    if (count == 0) throw ValidationError("single_step_error needs at least one step");
    return total / static_cast<double>(count);
}

}  // namespace nsv::field

#include "nsv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "nsv/rng.hpp"

namespace nsv::analysis {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double scaled_distance(std::span<const double> a, std::span<const double> b,
                       std::span<const double> range) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = std::max(range[i], 1e-12);
        const double d = (a[i] - b[i]) / r;
        s += d * d;
    }
    return std::sqrt(s);
}

/// Solve J x = rhs by Gaussian elimination with partial pivoting (tiny d).
std::optional<Vec> solve_linear(Mat j, Vec rhs) {
    const std::size_t n = j.rows;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(j(r, col)) > std::abs(j(pivot, col))) pivot = r;
        if (std::abs(j(pivot, col)) < 1e-14) return std::nullopt;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(j(pivot, c), j(col, c));
            std::swap(rhs[pivot], rhs[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = j(r, col) / j(col, col);
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) j(r, c) -= factor * j(col, c);
            rhs[r] -= factor * rhs[col];
        }
    }
    Vec x(n);
    for (std::size_t r = n; r-- > 0;) {
        double acc = rhs[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= j(r, c) * x[c];
        x[r] = acc / j(r, r);
    }
    return x;
}

}  // namespace

Field as_field(const field::FieldModel& model) {
    Field f;
    f.d = model.d;
    f.eval = [model](std::span<const double> v) { return field::eval_field(model, v); };
    f.jacobian = [model](std::span<const double> v) {
        check_dim(v, model.d, "field input");
        return nn::jacobian_of_net(model.net, v);
    };
    return f;
}

Field linear_field(const Mat& a, const Vec& center) {
    if (a.rows != a.cols || a.rows != center.size())
        throw DimensionError("linear_field needs a square matrix matching the center");
    Field f;
    f.d = a.rows;
    f.eval = [a, center](std::span<const double> v) {
        check_dim(v, center.size(), "field input");
        Vec out(a.rows, 0.0);
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t j = 0; j < a.cols; ++j) out[i] += a(i, j) * (v[j] - center[j]);
        return out;
    };
    f.jacobian = [a](std::span<const double>) { return a; };
    return f;
}

Field damped_field(const Field& f, const Vec& v_eq, double gamma) {
    if (gamma < 0.0) throw ValidationError("damping factor must be nonnegative");
    check_dim(v_eq, f.d, "equilibrium");
    Field out;
    out.d = f.d;
    out.eval = [f, v_eq, gamma](std::span<const double> v) {
        Vec val = f.eval(v);
        for (std::size_t i = 0; i < val.size(); ++i) val[i] -= gamma * (v[i] - v_eq[i]);
        return val;
    };
    if (f.jacobian)
        out.jacobian = [f, gamma](std::span<const double> v) {
            Mat j = f.jacobian(v);
            for (std::size_t i = 0; i < j.rows; ++i) j(i, i) -= gamma;
            return j;
        };
    return out;
}

Mat jacobian_at(const Field& f, std::span<const double> v, JacobianMethod method, double h) {
    check_dim(v, f.d, "jacobian point");
    if (method == JacobianMethod::analytic) {
        if (!f.jacobian) throw ValidationError("field provides no analytic jacobian");
        return f.jacobian(v);
    }
    Mat j(f.d, f.d);
    Vec plus(v.begin(), v.end()), minus(v.begin(), v.end());
    for (std::size_t c = 0; c < f.d; ++c) {
        plus[c] += h;
        minus[c] -= h;
        Vec fp = f.eval(plus);
        Vec fm = f.eval(minus);
        for (std::size_t r = 0; r < f.d; ++r) j(r, c) = (fp[r] - fm[r]) / (2.0 * h);
        plus[c] = v[c];
        minus[c] = v[c];
    }
    return j;
}

Vec natural_frequencies(const std::vector<Complex>& eigs, double imag_tol) {
    Vec freqs;
    for (const Complex& lambda : eigs)
        if (lambda.imag() > imag_tol) freqs.push_back(lambda.imag());
    std::sort(freqs.begin(), freqs.end(), std::greater<>());
    return freqs;
}

void StabilityParams::validate() const {
    if (n_directions < 1 || n_radii < 1 || horizon < 2)
        throw ValidationError("stability sampling needs n_d, n_e >= 1 and horizon >= 2");
    if (epsilons.empty()) throw ValidationError("stability epsilon list is empty");
    for (double e : epsilons)
        if (!(e > 0.0)) throw ValidationError("stability epsilons must be positive");
    if (!(dt > 0.0)) throw ValidationError("stability dt must be positive");
}

StabilityOutcome check_stability(const Field& f, std::span<const double> v_eq,
                                 std::span<const double> range, const StabilityParams& params) {
    params.validate();
    check_dim(v_eq, f.d, "equilibrium");
    check_dim(range, f.d, "range");

    StabilityOutcome outcome;
    outcome.stable = true;
    Rng rng(derive_seed(params.seed, "analysis.stability"));

    for (double eps : params.epsilons) {
        // all_ok[j] = every sampled direction stayed below eps at radius j+1
        std::vector<bool> all_ok(params.n_radii, true);
        for (std::size_t di = 0; di < params.n_directions; ++di) {
            Vec dir(f.d);
            double norm = 0.0;
            do {
                for (double& x : dir) x = rng.normal();
                norm = norm2(dir);
            } while (norm < 1e-12);
            for (double& x : dir) x /= norm;

            for (std::size_t j = 1; j <= params.n_radii; ++j) {
                const double d_ini = static_cast<double>(j) * eps / static_cast<double>(params.n_radii);
                Vec start(f.d);
                for (std::size_t i = 0; i < f.d; ++i)
                    start[i] = v_eq[i] + d_ini * dir[i] * std::max(range[i], 1e-12);
                double d_max = 0.0;
                try {
                    NsvTrajectory traj = field::integrate(f.eval, start, params.dt,
                                                          params.horizon, params.substeps);
                    for (const Vec& s : traj.states)
                        d_max = std::max(d_max, scaled_distance(s, v_eq, range));
                } catch (const ComputeError&) {
                    d_max = kInf;
                }
                if (!(d_max < eps)) all_ok[j - 1] = false;
            }
        }
        // certified radius: largest prefix of radii whose samples all stayed in
        std::size_t certified = 0;
        for (std::size_t j = 0; j < params.n_radii && all_ok[j]; ++j) certified = j + 1;
        bool pass = certified >= 1;
        if (params.strict_radius && certified * 2 < params.n_radii) pass = false;
        outcome.per_epsilon.emplace_back(eps, pass);
        outcome.stable = outcome.stable && pass;
    }
    return outcome;
}

void EquilibriumSearchParams::validate() const {
    if (n_candidates < 1) throw ValidationError("need at least one candidate");
    if (!(residual_accept > 0.0) || !(newton_tol > 0.0))
        throw ValidationError("tolerances must be positive");
    stability.validate();
}

namespace {

struct Candidate {
    Vec v;
    std::string provenance;
};

struct NewtonOutcome {
    Vec root;
    double residual = kInf;
    bool converged = false;
};

NewtonOutcome newton_solve(const Field& f, const Vec& start, double tol, std::size_t max_iters) {
    NewtonOutcome out;
    Vec v = start;
    Vec fv = f.eval(v);
    double fnorm = norm2(fv);
    const bool analytic = static_cast<bool>(f.jacobian);

    for (std::size_t iter = 0; iter < max_iters && fnorm >= tol; ++iter) {
        Mat j = jacobian_at(f, v, analytic ? JacobianMethod::analytic : JacobianMethod::central_fd);
        Vec rhs(fv);
        for (double& x : rhs) x = -x;
        auto delta = solve_linear(j, rhs);
        if (!delta) {
            // singular local Jacobian: nudge with a damped gradient step on |F|^2
            Vec g(f.d, 0.0);
            for (std::size_t r = 0; r < f.d; ++r)
                for (std::size_t c = 0; c < f.d; ++c) g[c] += j(r, c) * fv[r];
            const double gn = norm2(g);
            if (gn < 1e-14) break;
            delta = Vec(f.d);
            for (std::size_t c = 0; c < f.d; ++c) (*delta)[c] = -fnorm / gn * g[c] / gn;
        }

        // Armijo backtracking on |F|
        double alpha = 1.0;
        bool improved = false;
        for (int bt = 0; bt < 25; ++bt, alpha *= 0.5) {
            Vec trial(f.d);
            for (std::size_t i = 0; i < f.d; ++i) trial[i] = v[i] + alpha * (*delta)[i];
            Vec ft = f.eval(trial);
            const double tn = norm2(ft);
            if (tn < (1.0 - 1e-4 * alpha) * fnorm || tn < tol) {
                v = std::move(trial);
                fv = std::move(ft);
                fnorm = tn;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    out.root = v;
    out.residual = fnorm;
    out.converged = fnorm < tol;
    return out;
}

}  // namespace

std::vector<EquilibriumReport> find_equilibria(const Field& f,
                                               const std::vector<Vec>& test_states,
                                               const EquilibriumSearchParams& params,
                                               const std::vector<Vec>& extra_candidates) {
    params.validate();
    if (test_states.empty()) throw ValidationError("find_equilibria needs encoded test states");
    const std::size_t d = f.d;
    for (const Vec& s : test_states) check_dim(s, d, "test state");

    // bounding box D and per-dimension range of the data
    Vec lo = test_states[0], hi = test_states[0];
    for (const Vec& s : test_states)
        for (std::size_t i = 0; i < d; ++i) {
            lo[i] = std::min(lo[i], s[i]);
            hi[i] = std::max(hi[i], s[i]);
        }
    Vec range(d);
    for (std::size_t i = 0; i < d; ++i) range[i] = std::max(hi[i] - lo[i], 1e-12);

    auto lowest_by_residual = [&](const std::vector<Vec>& pool, std::size_t count) {
        std::vector<std::pair<double, std::size_t>> scored(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) scored[i] = {norm2(f.eval(pool[i])), i};
        std::sort(scored.begin(), scored.end());
        std::vector<Vec> out;
        for (std::size_t i = 0; i < std::min(count, scored.size()); ++i)
            out.push_back(pool[scored[i].second]);
        return out;
    };

    std::vector<Candidate> candidates;
    for (Vec& v : lowest_by_residual(test_states, params.n_candidates))
        candidates.push_back({std::move(v), "data"});

    if (d > 2) {
        std::vector<Vec> grid;
        std::size_t total = 1;
        for (std::size_t i = 0; i < d; ++i) total *= params.grid_per_dim;
        if (total <= params.grid_budget) {
            Vec point(d);
            for (std::size_t flat = 0; flat < total; ++flat) {
                std::size_t rem = flat;
                for (std::size_t i = 0; i < d; ++i) {
                    const std::size_t idx = rem % params.grid_per_dim;
                    rem /= params.grid_per_dim;
                    point[i] = lo[i] + (static_cast<double>(idx) + 0.5) /
                                           static_cast<double>(params.grid_per_dim) * range[i];
                }
                grid.push_back(point);
            }
        } else {
            Rng rng(derive_seed(params.stability.seed, "analysis.grid"));
            for (std::size_t k = 0; k < params.grid_budget; ++k) {
                Vec point(d);
                for (std::size_t i = 0; i < d; ++i) {
                    const std::size_t idx = rng.below(params.grid_per_dim);
                    point[i] = lo[i] + (static_cast<double>(idx) + 0.5) /
                                           static_cast<double>(params.grid_per_dim) * range[i];
                }
                grid.push_back(std::move(point));
            }
        }
        for (Vec& v : lowest_by_residual(grid, params.n_candidates))
            candidates.push_back({std::move(v), "grid"});
    }

    for (const Vec& v : extra_candidates) {
        check_dim(v, d, "extra candidate");
        candidates.push_back({v, "tail"});
    }

    struct Root {
        Vec v;
        double residual;
        std::string provenance;
    };
    std::vector<Root> roots;
    std::size_t rejected = 0;
    for (const Candidate& cand : candidates) {
        NewtonOutcome sol = newton_solve(f, cand.v, params.newton_tol, params.newton_max_iters);
        bool inside = true;
        for (std::size_t i = 0; i < d && inside; ++i)
            inside = sol.root[i] >= lo[i] - 1e-12 && sol.root[i] <= hi[i] + 1e-12;
        if (!inside || !(sol.residual < params.residual_accept)) {
            ++rejected;
            continue;
        }
        bool merged = false;
        for (Root& existing : roots) {
            if (scaled_distance(existing.v, sol.root, range) < params.merge_radius) {
                if (sol.residual < existing.residual) {
                    existing.v = sol.root;
                    existing.residual = sol.residual;
                    existing.provenance = cand.provenance;
                }
                merged = true;
                break;
            }
        }
        if (!merged) roots.push_back({sol.root, sol.residual, cand.provenance});
    }
    if (roots.empty())
        log_info("no equilibria converged (" + std::to_string(rejected) +
                 " candidates rejected by residual or bounding box)");

    std::sort(roots.begin(), roots.end(),
              [](const Root& a, const Root& b) { return a.v < b.v; });

    std::vector<EquilibriumReport> reports;
    for (const Root& root : roots) {
        EquilibriumReport rep;
        rep.v_eq = root.v;
        rep.residual = root.residual;
        rep.provenance = root.provenance;
        rep.jacobian = jacobian_at(
            f, root.v, f.jacobian ? JacobianMethod::analytic : JacobianMethod::central_fd);
        rep.eigenvalues = eigenvalues_small(rep.jacobian);
        rep.frequencies = natural_frequencies(rep.eigenvalues);
        StabilityOutcome stab = check_stability(f, root.v, range, params.stability);
        rep.stable = stab.stable;
        rep.per_epsilon = stab.per_epsilon;
        reports.push_back(std::move(rep));
    }
    return reports;
}

std::vector<Vec> tail_average_candidates(const std::vector<NsvTrajectory>& trajectories,
                                         std::size_t n_tail) {
    if (n_tail < 1) throw ValidationError("n_tail must be >= 1");
    std::vector<Vec> out;
    for (const auto& traj : trajectories) {
        if (traj.states.size() < n_tail)
            throw ValidationError("trajectory shorter than n_tail = " + std::to_string(n_tail));
        Vec mean(traj.states[0].size(), 0.0);
        for (std::size_t i = traj.states.size() - n_tail; i < traj.states.size(); ++i)
            for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += traj.states[i][k];
        for (double& x : mean) x /= static_cast<double>(n_tail);
        out.push_back(std::move(mean));
    }
    return out;
}

Vec divergence_series(const NsvTrajectory& a, const NsvTrajectory& b) {
    if (a.states.size() != b.states.size())
        throw ValidationError("divergence_series needs equal-length trajectories");
    if (a.dt != b.dt) throw ValidationError("divergence_series needs matching dt");
    const double initial = dist2(a.states[0], b.states[0]);
    if (!(initial > 0.0)) throw ComputeError("divergence_series: zero initial deviation");
    Vec series(a.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i)
        series[i] = dist2(a.states[i], b.states[i]) / initial;
    return series;
}

Vec coverage_series(const NsvTrajectory& traj, std::size_t n_bins) {
    if (n_bins < 1) throw ValidationError("coverage needs n_bins >= 1");
    if (traj.states.empty()) throw ValidationError("coverage of an empty trajectory");
    const std::size_t d = traj.states[0].size();
    double total_boxes = std::pow(static_cast<double>(n_bins), static_cast<double>(d));

    std::unordered_set<std::size_t> visited;
    Vec series(traj.states.size());
    bool clamped = false;
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
        std::size_t index = 0;
        for (std::size_t i = 0; i < d; ++i) {
            double x = traj.states[t][i];
            if (x < -1.0 || x > 1.0) {
                clamped = true;
                x = std::clamp(x, -1.0, 1.0);
            }
            auto bin = static_cast<std::size_t>(std::min(
                static_cast<double>(n_bins - 1),
                std::floor((x + 1.0) / 2.0 * static_cast<double>(n_bins))));
            index = index * n_bins + bin;
        }
        visited.insert(index);
        series[t] = static_cast<double>(visited.size()) / total_boxes;
    }
    if (clamped) log_warn("coverage_series clamped states outside [-1,1]^d");
    return series;
}

double coverage_increase_rate(std::span<const double> series) {
    if (series.size() < 2) throw ValidationError("coverage rate needs length >= 2");
    return (series.back() - series.front()) / static_cast<double>(series.size() - 1);
}

KMeansResult kmeans_2(std::span<const double> values, std::uint64_t seed) {
    if (values.size() < 2) throw ValidationError("kmeans_2 needs at least two values");
    double vmin = values[0], vmax = values[0];
    for (double v : values) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (vmin == vmax) throw ComputeError("kmeans_2: all values identical");

    double best_inertia = kInf;
    double best_lo = vmin, best_hi = vmax;
    for (std::uint64_t restart = 0; restart < 10; ++restart) {
        Rng rng(derive_seed(seed, "analysis.kmeans", restart));
        double c0 = values[rng.below(values.size())];
        double c1 = c0;
        for (int tries = 0; tries < 64 && c1 == c0; ++tries)
            c1 = values[rng.below(values.size())];
        if (c1 == c0) continue;

        for (int iter = 0; iter < 100; ++iter) {
            double sum0 = 0.0, sum1 = 0.0;
            std::size_t n0 = 0, n1 = 0;
            for (double v : values) {
                if (std::abs(v - c0) <= std::abs(v - c1)) {
                    sum0 += v;
                    ++n0;
                } else {
                    sum1 += v;
                    ++n1;
                }
            }
            if (n0 == 0 || n1 == 0) break;
            const double new0 = sum0 / static_cast<double>(n0);
            const double new1 = sum1 / static_cast<double>(n1);
            if (new0 == c0 && new1 == c1) break;
            c0 = new0;
            c1 = new1;
        }
        double inertia = 0.0;
        for (double v : values)
            inertia += std::min((v - c0) * (v - c0), (v - c1) * (v - c1));
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_lo = std::min(c0, c1);
            best_hi = std::max(c0, c1);
        }
    }

    KMeansResult result;
    result.lo_centroid = best_lo;
    result.hi_centroid = best_hi;
    result.threshold = 0.5 * (best_lo + best_hi);
    return result;
}

void ChaosConfig::validate() const {
    if (n_bins < 1) throw ValidationError("chaos n_bins must be >= 1");
    if (!(near_pair_fraction > 0.0)) throw ValidationError("near_pair_fraction must be positive");
    if (histogram_bins < 1) throw ValidationError("histogram_bins must be >= 1");
}

ChaosReport chaos_report(const std::vector<NsvTrajectory>& trajectories,
                         std::span<const double> v_eq, std::span<const double> range,
                         const ChaosConfig& cfg) {
    cfg.validate();
    if (trajectories.size() < 2) throw ValidationError("chaos_report needs >= 2 trajectories");
    const std::size_t len = trajectories[0].states.size();
    const std::size_t d = trajectories[0].states[0].size();
    check_dim(v_eq, d, "equilibrium");
    check_dim(range, d, "range");
    for (const auto& traj : trajectories)
        if (traj.states.size() != len || traj.dt != trajectories[0].dt)
            throw ValidationError("chaos_report trajectories must share length and dt");

    ChaosReport report;
    for (const auto& traj : trajectories)
        report.rates.push_back(coverage_increase_rate(coverage_series(traj, cfg.n_bins)));

    report.clustering = kmeans_2(report.rates, cfg.seed);
    for (double rate : report.rates)
        report.classes.push_back(rate > report.clustering.threshold ? 1 : 0);

    // near pairs by range-scaled initial distance
    for (std::size_t i = 0; i < trajectories.size(); ++i)
        for (std::size_t j = i + 1; j < trajectories.size(); ++j) {
            const double gap =
                scaled_distance(trajectories[i].states[0], trajectories[j].states[0], range);
            if (gap > 0.0 && gap < cfg.near_pair_fraction) report.pairs.emplace_back(i, j);
        }

    Vec mean_reg(len, 0.0), mean_cha(len, 0.0);
    std::size_t n_reg = 0, n_cha = 0;
    for (const auto& [i, j] : report.pairs) {
        Vec curve = divergence_series(trajectories[i], trajectories[j]);
        if (report.classes[i] != report.classes[j]) {
            report.divergence_curves.push_back(std::move(curve));
            continue;  // mixed pair: keep the curve, skip the class means
        }
        Vec& target = report.classes[i] == 1 ? mean_cha : mean_reg;
        for (std::size_t t = 0; t < len; ++t) target[t] += curve[t];
        (report.classes[i] == 1 ? n_cha : n_reg) += 1;
        report.divergence_curves.push_back(std::move(curve));
    }
    if (report.pairs.empty()) report.note = "no near pairs below the initial-distance threshold";
    if (n_reg > 0)
        for (double& x : mean_reg) x /= static_cast<double>(n_reg);
    if (n_cha > 0)
        for (double& x : mean_cha) x /= static_cast<double>(n_cha);
    report.mean_divergence_regular = std::move(mean_reg);
    report.mean_divergence_chaotic = std::move(mean_cha);
    report.final_divergence_regular = n_reg > 0 ? report.mean_divergence_regular.back() : 0.0;
    report.final_divergence_chaotic = n_cha > 0 ? report.mean_divergence_chaotic.back() : 0.0;

    // per-trajectory mean distance to the equilibrium, range-scaled
    for (const auto& traj : trajectories) {
        double mean = 0.0;
        for (const Vec& s : traj.states) mean += scaled_distance(s, v_eq, range);
        report.distance_to_eq.push_back(mean / static_cast<double>(traj.states.size()));
    }

    double dmax = 0.0;
    for (double x : report.distance_to_eq) dmax = std::max(dmax, x);
    dmax = std::max(dmax, 1e-12);
    report.histogram_edges.resize(cfg.histogram_bins + 1);
    for (std::size_t b = 0; b <= cfg.histogram_bins; ++b)
        report.histogram_edges[b] =
            dmax * static_cast<double>(b) / static_cast<double>(cfg.histogram_bins);
    report.histogram_regular.assign(cfg.histogram_bins, 0.0);
    report.histogram_chaotic.assign(cfg.histogram_bins, 0.0);
    for (std::size_t k = 0; k < trajectories.size(); ++k) {
        auto bin = static_cast<std::size_t>(
            std::min(static_cast<double>(cfg.histogram_bins - 1),
                     std::floor(report.distance_to_eq[k] / dmax *
                                static_cast<double>(cfg.histogram_bins))));
        (report.classes[k] == 1 ? report.histogram_chaotic : report.histogram_regular)[bin] += 1.0;
    }
    return report;
}

void LimitCycleConfig::validate() const {
    if (!(transient_fraction >= 0.0) || transient_fraction >= 1.0)
        throw ValidationError("transient_fraction must be in [0, 1)");
    if (!(annulus_ratio > 0.0) || !(recurrence_tol > 0.0))
        throw ValidationError("limit-cycle thresholds must be positive");
    if (!(recurrence_fraction > 0.0) || recurrence_fraction > 1.0)
        throw ValidationError("recurrence_fraction must be in (0, 1]");
    if (min_period_samples < 2) throw ValidationError("min_period_samples must be >= 2");
}

namespace {

/// Mean |V(t + lag) - V(t)| over the tail, with linear interpolation at
/// fractional lags; also reports the share of points within tol.
std::pair<double, double> recurrence_at(const std::vector<Vec>& tail, double lag, double tol) {
    const auto whole = static_cast<std::size_t>(std::floor(lag));
    const double frac = lag - static_cast<double>(whole);
    const std::size_t d = tail[0].size();
    const std::size_t last = tail.size() - whole - (frac > 0.0 ? 1 : 0);
    if (last < 1 || last > tail.size()) return {kInf, 0.0};

    double sum = 0.0;
    std::size_t hits = 0;
    Vec ahead(d);
    for (std::size_t t = 0; t < last; ++t) {
        for (std::size_t i = 0; i < d; ++i) {
            const double a = tail[t + whole][i];
            const double b = frac > 0.0 ? tail[t + whole + 1][i] : a;
            ahead[i] = a + frac * (b - a);
        }
        const double r = dist2(ahead, tail[t]);
        sum += r;
        if (r < tol) ++hits;
    }
    return {sum / static_cast<double>(last),
            static_cast<double>(hits) / static_cast<double>(last)};
}

}  // namespace

LimitCycleReport detect_limit_cycle(const NsvTrajectory& traj, const LimitCycleConfig& cfg) {
    cfg.validate();
    LimitCycleReport report;
    report.status = "ok";

    const std::size_t n = traj.states.size();
    const auto skip = static_cast<std::size_t>(std::ceil(cfg.transient_fraction *
                                                         static_cast<double>(n)));
    if (n < skip + 3 * cfg.min_period_samples) {
        report.status = "inconclusive";
        return report;
    }
    std::vector<Vec> tail(traj.states.begin() + static_cast<std::ptrdiff_t>(skip),
                          traj.states.end());
    report.transient_time = static_cast<double>(skip) * traj.dt;

    const std::size_t d = tail[0].size();
    Vec center(d, 0.0);
    for (const Vec& s : tail)
        for (std::size_t i = 0; i < d; ++i) center[i] += s[i];
    for (double& x : center) x /= static_cast<double>(tail.size());

    double rmin = kInf, rmax = 0.0, rmean = 0.0;
    for (const Vec& s : tail) {
        const double r = dist2(s, center);
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        rmean += r;
    }
    rmean /= static_cast<double>(tail.size());
    report.mean_radius = rmean;

    // (a) the tail must stay an annulus away from its own mean
    if (rmax <= 0.0 || rmin <= cfg.annulus_ratio * rmax) return report;

    // (b) near-recurrence: coarse integer-lag scan for the first qualifying
    // dip, then fractional refinement around it
    const double tol = cfg.recurrence_tol * rmean;
    const std::size_t max_lag = tail.size() / 2;
    if (max_lag < cfg.min_period_samples) {
        report.status = "inconclusive";
        return report;
    }

    std::vector<double> mean_residual(max_lag + 1, kInf);
    std::vector<double> hit_fraction(max_lag + 1, 0.0);
    for (std::size_t lag = cfg.min_period_samples; lag <= max_lag; ++lag) {
        auto [res, hits] = recurrence_at(tail, static_cast<double>(lag), tol);
        mean_residual[lag] = res;
        hit_fraction[lag] = hits;
    }

    std::size_t dip = 0;
    for (std::size_t lag = cfg.min_period_samples; lag <= max_lag; ++lag) {
        if (hit_fraction[lag] < cfg.recurrence_fraction) continue;
        const bool left_ok = lag == cfg.min_period_samples ||
                             mean_residual[lag] <= mean_residual[lag - 1];
        const bool right_ok = lag == max_lag || mean_residual[lag] <= mean_residual[lag + 1];
        if (left_ok && right_ok) {
            dip = lag;
            break;
        }
    }
    if (dip == 0) return report;

    double best_lag = static_cast<double>(dip);
    double best_res = mean_residual[dip];
    double best_hits = hit_fraction[dip];
    for (double lag = std::max<double>(cfg.min_period_samples, best_lag - 1.0);
         lag <= std::min(static_cast<double>(max_lag), static_cast<double>(dip) + 1.0);
         lag += 0.125) {
        auto [res, hits] = recurrence_at(tail, lag, tol);
        if (res < best_res) {
            best_res = res;
            best_hits = hits;
            best_lag = lag;
        }
    }
    if (best_hits < cfg.recurrence_fraction) return report;
    if (static_cast<double>(tail.size()) < 3.0 * best_lag) {
        report.status = "inconclusive";
        return report;
    }

    report.detected = true;
    report.period = best_lag * traj.dt;
    report.recurrence_residual = best_res;
    return report;
}

double smoothness_metric(const NsvTrajectory& traj, int k, double p, bool normalize,
                         std::span<const double> range) {
    if (k != 1 && k != 2) throw ValidationError("smoothness_metric supports k in {1, 2}");
    if (!(p >= 1.0)) throw ValidationError("smoothness_metric needs p >= 1 (or infinity)");
    const std::size_t n = traj.states.size();
    if (n < static_cast<std::size_t>(k) + 1)
        throw ValidationError("trajectory too short for derivative order " + std::to_string(k));
    if (!(traj.dt > 0.0)) throw ValidationError("trajectory dt must be positive");
    const std::size_t d = traj.states[0].size();

    Vec scale(d, 1.0);
    if (normalize) {
        if (!range.empty()) {
            check_dim(range, d, "range");
            for (std::size_t i = 0; i < d; ++i) scale[i] = std::max(range[i], 1e-12);
        } else {
            Vec lo = traj.states[0], hi = traj.states[0];
            for (const Vec& s : traj.states)
                for (std::size_t i = 0; i < d; ++i) {
                    lo[i] = std::min(lo[i], s[i]);
                    hi[i] = std::max(hi[i], s[i]);
                }
            for (std::size_t i = 0; i < d; ++i) scale[i] = std::max(hi[i] - lo[i], 1e-12);
        }
    }

    std::vector<double> norms;
    if (k == 1) {
        for (std::size_t t = 0; t + 1 < n; ++t) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double v = (traj.states[t + 1][i] - traj.states[t][i]) / (traj.dt * scale[i]);
                s += v * v;
            }
            norms.push_back(std::sqrt(s));
        }
    } else {
        for (std::size_t t = 1; t + 1 < n; ++t) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double v = (traj.states[t + 1][i] - 2.0 * traj.states[t][i] +
                                  traj.states[t - 1][i]) /
                                 (traj.dt * traj.dt * scale[i]);
                s += v * v;
            }
            norms.push_back(std::sqrt(s));
        }
    }

    if (std::isinf(p)) {
        double m = 0.0;
        for (double x : norms) m = std::max(m, x);
        return m;
    }
    double acc = 0.0;
    for (double x : norms) acc += std::pow(x, p) * traj.dt;
    return std::pow(acc, 1.0 / p);
}

}  // namespace nsv::analysis

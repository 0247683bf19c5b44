#include "nsv/transport.hpp"

#include <cmath>

#include "nsv/rng.hpp"

namespace nsv::transport {

namespace {

struct CostMatrix {
    std::size_t n, m;
    std::vector<double> c;  // row-major n x m
    double operator()(std::size_t i, std::size_t j) const { return c[i * m + j]; }
};

CostMatrix squared_costs(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    CostMatrix cm{a.size(), b.size(), std::vector<double>(a.size() * b.size())};
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a[i].size(); ++k) {
                double d = a[i][k] - b[j][k];
                s += d * d;
            }
            cm.c[i * cm.m + j] = s;
        }
    return cm;
}

double logsumexp(std::span<const double> v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

struct OtResult {
    double value = 0.0;
    Vec f, g;               // converged potentials
    bool converged = true;
    std::size_t iters = 0;
};

/// Log-domain Sinkhorn with uniform weights. `symmetric` enables the damped
/// self-transport iteration used for the OT(X,X) debiasing terms.
OtResult sinkhorn_ot(const CostMatrix& cost, double eps, std::size_t max_iters, double tol,
                     bool symmetric) {
    const std::size_t n = cost.n, m = cost.m;
    const double log_an = -std::log(static_cast<double>(n));
    const double log_bm = -std::log(static_cast<double>(m));

    OtResult res;
    res.f.assign(n, 0.0);
    res.g.assign(m, 0.0);
    Vec buf(std::max(n, m));

    res.converged = false;
    for (std::size_t it = 0; it < max_iters; ++it) {
        double change = 0.0;
        if (symmetric) {
            // f and g share one potential; damped update for stability
            Vec fnew(n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j)
                    buf[j] = log_bm + (res.g[j] - cost(i, j)) / eps;
                fnew[i] = -eps * logsumexp({buf.data(), m});
            }
            for (std::size_t i = 0; i < n; ++i) {
                double updated = 0.5 * (res.f[i] + fnew[i]);
                change = std::max(change, std::abs(updated - res.f[i]));
                res.f[i] = updated;
            }
            res.g = res.f;
        } else {
            for (std::size_t j = 0; j < m; ++j) {
                for (std::size_t i = 0; i < n; ++i)
                    buf[i] = log_an + (res.f[i] - cost(i, j)) / eps;
                res.g[j] = -eps * logsumexp({buf.data(), n});
            }
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j)
                    buf[j] = log_bm + (res.g[j] - cost(i, j)) / eps;
                double updated = -eps * logsumexp({buf.data(), m});
                change = std::max(change, std::abs(updated - res.f[i]));
                res.f[i] = updated;
            }
        }
        res.iters = it + 1;
        if (change < tol) {
            res.converged = true;
            break;
        }
    }

    // Dual value with the mass-defect correction, exact at convergence.
    double value = 0.0;
    for (double fi : res.f) value += fi / static_cast<double>(n);
    for (double gj : res.g) value += gj / static_cast<double>(m);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            mass += std::exp(log_an + log_bm + (res.f[i] + res.g[j] - cost(i, j)) / eps);
    res.value = value - eps * (mass - 1.0);
    return res;
}

/// d(OT)/d(a_points), covering both marginals when `b` aliases `a`.
void accumulate_plan_gradient(const CostMatrix& cost, const OtResult& ot, double eps,
                              const std::vector<Vec>& a, const std::vector<Vec>& b,
                              bool self_transport, double weight, std::vector<Vec>& grad) {
    const std::size_t n = cost.n, m = cost.m;
    const double log_ab = -std::log(static_cast<double>(n)) - std::log(static_cast<double>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double pij = std::exp(log_ab + (ot.f[i] + ot.g[j] - cost(i, j)) / eps);
            if (pij == 0.0) continue;
            for (std::size_t k = 0; k < a[i].size(); ++k) {
                double dc = 2.0 * (a[i][k] - b[j][k]);
                grad[i][k] += weight * pij * dc;
                if (self_transport) grad[j][k] -= weight * pij * dc;
            }
        }
}

}  // namespace

void SinkhornConfig::validate() const {
    if (!(blur > 0.0)) throw ValidationError("sinkhorn blur must be positive");
    if (max_iters < 1) throw ValidationError("sinkhorn max_iters must be >= 1");
}

SinkhornResult sinkhorn_divergence(const std::vector<Vec>& a_points,
                                   const std::vector<Vec>& b_points,
                                   const SinkhornConfig& cfg) {
    cfg.validate();
    if (a_points.empty() || b_points.empty())
        throw ValidationError("sinkhorn point sets must be non-empty");
    const std::size_t dim = a_points[0].size();
    for (const Vec& p : a_points) check_dim(p, dim, "sinkhorn point");
    for (const Vec& p : b_points) check_dim(p, dim, "sinkhorn point");

    SinkhornResult out;
    out.grad_a.assign(a_points.size(), Vec(dim, 0.0));

    CostMatrix cab = squared_costs(a_points, b_points);
    OtResult ab = sinkhorn_ot(cab, cfg.blur, cfg.max_iters, cfg.tol, false);
    out.value = ab.value;
    out.converged = ab.converged;
    out.iters = ab.iters;
    accumulate_plan_gradient(cab, ab, cfg.blur, a_points, b_points, false, 1.0, out.grad_a);

    if (cfg.debiased) {
        CostMatrix caa = squared_costs(a_points, a_points);
        OtResult aa = sinkhorn_ot(caa, cfg.blur, cfg.max_iters, cfg.tol, true);
        CostMatrix cbb = squared_costs(b_points, b_points);
        OtResult bb = sinkhorn_ot(cbb, cfg.blur, cfg.max_iters, cfg.tol, true);
        out.value -= 0.5 * aa.value + 0.5 * bb.value;
        out.converged = out.converged && aa.converged && bb.converged;
        out.iters = std::max({out.iters, aa.iters, bb.iters});
        // -1/2 OT(A,A): the i-th point enters through both marginals
        accumulate_plan_gradient(caa, aa, cfg.blur, a_points, a_points, true, -0.5, out.grad_a);
    }

    if (!out.converged)
        log_warn("sinkhorn did not reach tol within " + std::to_string(cfg.max_iters) +
                 " iterations; using last iterate");
    return out;
}

std::vector<Vec> uniform_reference(std::size_t d, std::size_t n, std::uint64_t seed) {
    if (d < 1 || n < 1) throw ValidationError("uniform_reference needs d >= 1 and n >= 1");
    Rng rng(derive_seed(seed, "transport.reference"));
    std::vector<Vec> pts(n, Vec(d));
    for (Vec& p : pts)
        for (double& x : p) x = rng.uniform(-1.0, 1.0);
    return pts;
}

}  // namespace nsv::transport

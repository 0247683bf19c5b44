#include "nsv/eig.hpp"

#include <algorithm>
#include <cmath>

namespace nsv::eig {

namespace {

Mat matmul(const Mat& x, const Mat& y) {
    Mat out(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double v = x(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < y.cols; ++j) out(i, j) += v * y(k, j);
        }
    return out;
}

double trace(const Mat& m) {
    double t = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) t += m(i, i);
    return t;
}

Complex horner(const Vec& coeffs, Complex z) {
    Complex acc(coeffs[0], 0.0);
    for (std::size_t i = 1; i < coeffs.size(); ++i) acc = acc * z + coeffs[i];
    return acc;
}

Complex horner_deriv(const Vec& coeffs, Complex z) {
    const std::size_t n = coeffs.size() - 1;
    Complex acc(coeffs[0] * static_cast<double>(n), 0.0);
    for (std::size_t i = 1; i < n; ++i)
        acc = acc * z + coeffs[i] * static_cast<double>(n - i);
    return acc;
}

}  // namespace

Vec char_poly(const Mat& m) {
    if (m.rows != m.cols) throw DimensionError("char_poly needs a square matrix");
    const std::size_t n = m.rows;
    Vec coeffs(n + 1, 0.0);
    coeffs[0] = 1.0;
    Mat mk = m;
    for (std::size_t k = 1; k <= n; ++k) {
        const double ck = -trace(mk) / static_cast<double>(k);
        coeffs[k] = ck;
        if (k == n) break;
        for (std::size_t i = 0; i < n; ++i) mk(i, i) += ck;
        mk = matmul(m, mk);
    }
    return coeffs;
}

std::vector<Complex> poly_roots(const Vec& coeffs_in) {
    if (coeffs_in.size() < 2) throw ValidationError("polynomial must have degree >= 1");
    if (coeffs_in[0] == 0.0) throw ValidationError("leading coefficient must be nonzero");

    Vec coeffs = coeffs_in;
    for (double& c : coeffs) c /= coeffs_in[0];
    const std::size_t n = coeffs.size() - 1;

    // Cauchy bound keeps the initial ring outside no root.
    double bound = 0.0;
    for (std::size_t i = 1; i <= n; ++i) bound = std::max(bound, std::abs(coeffs[i]));
    bound += 1.0;

    std::vector<Complex> z(n);
    const Complex spread(0.4, 0.9);  // standard non-real, non-unit seed angle
    Complex w(1.0, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        w *= spread;
        z[k] = bound * w / std::abs(w) * (0.5 + 0.5 * static_cast<double>(k + 1) / n);
    }

    const int max_iters = 500;
    const double tol = 1e-14;
    bool settled = false;
    for (int iter = 0; iter < max_iters && !settled; ++iter) {
        double max_step = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            Complex denom(1.0, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                if (j != k) denom *= z[k] - z[j];
            if (denom == Complex(0.0, 0.0)) {
                z[k] += Complex(1e-8, 1e-8);
                max_step = 1.0;
                continue;
            }
            const Complex step = horner(coeffs, z[k]) / denom;
            z[k] -= step;
            max_step = std::max(max_step, std::abs(step) / std::max(1.0, std::abs(z[k])));
        }
        settled = max_step < tol;
    }
    if (!settled) {
        // Multiple roots converge only linearly; accept if residuals are small.
        double worst = 0.0;
        for (const Complex& r : z) worst = std::max(worst, std::abs(horner(coeffs, r)));
        if (worst > 1e-6) {
            std::string msg = "polynomial root iteration did not converge; residuals:";
            for (const Complex& r : z) msg += " " + format_double(std::abs(horner(coeffs, r)));
            throw ComputeError(msg);
        }
    }

    for (Complex& r : z) {
        const Complex dp = horner_deriv(coeffs, r);
        if (std::abs(dp) > 1e-12) r -= horner(coeffs, r) / dp;
    }
    return z;
}

std::vector<Complex> eigenvalues_small(const Mat& m) {
    if (m.rows != m.cols) throw DimensionError("eigenvalues need a square matrix");
    if (m.rows == 0 || m.rows > 4)
        throw ValidationError("eigenvalues_small supports 1 <= n <= 4, got " +
                              std::to_string(m.rows));
    // Scale to unit magnitude so the root finder sees O(1) coefficients, then
    // scale the roots back.
    double scale = 0.0;
    for (double v : m.a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) scale = 1.0;
    Mat scaled = m;
    for (double& v : scaled.a) v /= scale;

    auto roots = poly_roots(char_poly(scaled));
    for (Complex& r : roots) r *= scale;
    std::sort(roots.begin(), roots.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return roots;
}

}  // namespace nsv::eig

#include "nsv/dimension.hpp"

#include <algorithm>
#include <cmath>

#include "nsv/rng.hpp"

namespace nsv::dimension {

std::vector<Vec> nearest_neighbors(const std::vector<Vec>& points, std::size_t k) {
    const std::size_t n = points.size();
    if (k >= n) throw ValidationError("nearest_neighbors needs k < n");
    const std::size_t dim = points[0].size();
    for (const Vec& p : points) check_dim(p, dim, "point");

    std::vector<Vec> result(n);
    std::vector<std::pair<double, std::size_t>> row(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t w = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double d = points[i][c] - points[j][c];
                s += d * d;
            }
            row[w++] = {s, j};
        }
        std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
        result[i].resize(k);
        for (std::size_t j = 0; j < k; ++j) result[i][j] = std::sqrt(row[j].first);
    }
    return result;
}

DimensionEstimate levina_bickel(const std::vector<Vec>& points, std::size_t k_min,
                                std::size_t k_max, std::size_t subsample_cap,
                                std::uint64_t seed) {
    if (k_min < 3) throw ValidationError("levina_bickel needs k_min >= 3");
    if (k_max < k_min) throw ValidationError("levina_bickel needs k_max >= k_min");

    std::vector<Vec> cloud;
    const std::vector<Vec>* used = &points;
    if (subsample_cap > 0 && points.size() > subsample_cap) {
        std::vector<std::size_t> idx(points.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(derive_seed(seed, "dimension.subsample"));
        for (std::size_t i = 0; i < subsample_cap; ++i)
            std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
        cloud.reserve(subsample_cap);
        for (std::size_t i = 0; i < subsample_cap; ++i) cloud.push_back(points[idx[i]]);
        used = &cloud;
    }
    const std::size_t n = used->size();
    if (n <= k_max + 1)
        throw ValidationError("levina_bickel needs more than k_max + 1 points, got " +
                              std::to_string(n));

    auto knn = nearest_neighbors(*used, k_max);

    DimensionEstimate est;
    est.k_min = k_min;
    est.k_max = k_max;
    est.n_points = n;

    for (std::size_t k = k_min; k <= k_max; ++k) {
        double sum = 0.0;
        std::size_t used_points = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec& dists = knn[i];
            if (dists[k - 1] <= 0.0 || dists[0] <= 0.0) {
                ++est.duplicate_warnings;
                continue;
            }
            double acc = 0.0;
            for (std::size_t j = 0; j + 1 < k; ++j) acc += std::log(dists[k - 1] / dists[j]);
            acc /= static_cast<double>(k - 2);
            if (acc <= 0.0) {
                ++est.duplicate_warnings;
                continue;
            }
            sum += 1.0 / acc;
            ++used_points;
        }
        if (used_points == 0)
            throw ComputeError("levina_bickel: degenerate input (all points duplicated)");
        est.per_k.push_back(sum / static_cast<double>(used_points));
    }

    double total = 0.0;
    for (double v : est.per_k) total += v;
    est.raw = total / static_cast<double>(est.per_k.size());
    est.rounded = static_cast<int>(std::llround(est.raw));
    return est;
}

}  // namespace nsv::dimension

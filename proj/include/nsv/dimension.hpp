#pragma once

#include <cstdint>
#include <vector>

#include "nsv/common.hpp"

namespace nsv::dimension {

struct DimensionEstimate {
    double raw = 0.0;
    int rounded = 0;
    std::size_t k_min = 0, k_max = 0;
    Vec per_k;  // averaged estimate at each k in [k_min, k_max]
    std::size_t n_points = 0;
    std::size_t duplicate_warnings = 0;
};

/// Exact brute-force k-nearest-neighbor distances, sorted ascending per
/// point; ties broken by input index.
std::vector<Vec> nearest_neighbors(const std::vector<Vec>& points, std::size_t k);

/// Levina-Bickel maximum-likelihood intrinsic dimension:
///   m_k(x) = [ (1/(k-2)) sum_{j<k} ln(T_k(x)/T_j(x)) ]^{-1}
/// averaged over points, then over k in [k_min, k_max], rounded to the
/// nearest integer. Points with a zero neighbor distance are skipped with a
/// warning count; an all-duplicate cloud is a degenerate-input error.
/// Clouds larger than subsample_cap are subsampled deterministically.
DimensionEstimate levina_bickel(const std::vector<Vec>& points, std::size_t k_min = 10,
                                std::size_t k_max = 20, std::size_t subsample_cap = 5000,
                                std::uint64_t seed = 0);

}  // namespace nsv::dimension

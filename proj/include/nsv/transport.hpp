#pragma once

#include <cstdint>
#include <vector>

#include "nsv/common.hpp"

namespace nsv::transport {

struct SinkhornConfig {
    double blur = 0.05;          // entropic regularization on squared-distance cost
    std::size_t max_iters = 300;
    double tol = 1e-9;           // max potential change per sweep
    bool debiased = true;

    void validate() const;
};

struct SinkhornResult {
    double value = 0.0;
    std::vector<Vec> grad_a;  // d(value)/d(a_points[i])
    bool converged = true;
    std::size_t iters = 0;
};

/// Entropic optimal transport divergence between two uniform-weight point
/// clouds with squared Euclidean cost. Debiased form
///   S(A,B) = OT_eps(A,B) - OT_eps(A,A)/2 - OT_eps(B,B)/2.
/// The gradient with respect to the A points comes from the envelope form at
/// the converged potentials. Non-convergence within max_iters degrades to a
/// warning flag on the result, never a hard failure.
SinkhornResult sinkhorn_divergence(const std::vector<Vec>& a_points,
                                   const std::vector<Vec>& b_points,
                                   const SinkhornConfig& cfg);

/// Seeded-uniform (not low-discrepancy) samples in [-1,1]^d.
std::vector<Vec> uniform_reference(std::size_t d, std::size_t n, std::uint64_t seed);

}  // namespace nsv::transport

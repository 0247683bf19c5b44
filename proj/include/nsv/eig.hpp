#pragma once

#include <complex>
#include <vector>

#include "nsv/common.hpp"

namespace nsv::eig {

using Complex = std::complex<double>;

/// Monic characteristic polynomial coefficients {1, c1, ..., cn} of a square
/// matrix, computed by the Faddeev-LeVerrier trace recursion.
Vec char_poly(const Mat& m);

/// All complex roots of a real-coefficient polynomial (coeffs[0] must be
/// nonzero, highest degree first) via Durand-Kerner simultaneous iteration,
/// each polished by one Newton step. Throws ComputeError with the residuals
/// if the iteration fails to settle.
std::vector<Complex> poly_roots(const Vec& coeffs);

/// Eigenvalues of a small (n <= 4) real matrix, sorted by (Re, Im).
std::vector<Complex> eigenvalues_small(const Mat& m);

}  // namespace nsv::eig

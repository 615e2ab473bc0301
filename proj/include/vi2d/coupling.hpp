#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <variant>
#include <vector>

#include "vi2d/matrix.hpp"

namespace vi2d {

/// The unique linear inter-variable coupling that commutes with every
/// permutation of the variable axis: alpha * I + beta * ones * ones^T.
struct CanonicalCoupling {
    double alpha = 0.0;  // self-dynamics weight
    double beta = 0.0;   // pooled-interaction weight
    std::size_t num_vars = 1;

    bool operator==(const CanonicalCoupling&) const = default;
};

/// Eigenstructure of a canonical coupling: the zero-sum subspace carries
/// alpha with multiplicity C-1, the all-ones direction carries alpha + C*beta.
struct ModeSpectrum {
    double lambda_diff = 0.0;
    double lambda_mean = 0.0;
    bool stable = false;
};

/// Entry pair that witnesses a failed canonical decomposition.
struct CouplingRejection {
    std::size_t row_a = 0, col_a = 0;
    std::size_t row_b = 0, col_b = 0;
    double value_a = 0.0, value_b = 0.0;
};

using DecomposeResult = std::variant<CanonicalCoupling, CouplingRejection>;

inline constexpr double kCouplingTol = 1e-10;

inline Matrix build_canonical(const CanonicalCoupling& c) {
    if (c.num_vars == 0) throw std::invalid_argument("build_canonical: num_vars must be >= 1");
    if (!std::isfinite(c.alpha) || !std::isfinite(c.beta))
        throw std::domain_error("build_canonical: non-finite coefficient");
    Matrix m = Matrix::constant(c.num_vars, c.num_vars, c.beta);
    for (std::size_t i = 0; i < c.num_vars; ++i) m(i, i) = c.alpha + c.beta;
    return m;
}

/// Accepts exactly the matrices with one shared diagonal value d and one
/// shared off-diagonal value o (within kCouplingTol), returning
/// (alpha = d - o, beta = o); otherwise reports the first violating pair.
inline DecomposeResult decompose_to_canonical(const Matrix& m) {
    if (!m.is_square()) throw std::invalid_argument("decompose_to_canonical: matrix must be square");
    const std::size_t n = m.rows();
    if (n == 0) throw std::invalid_argument("decompose_to_canonical: empty matrix");
    const double d = m(0, 0);
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(m(i, i) - d) > kCouplingTol)
            return CouplingRejection{0, 0, i, i, d, m(i, i)};
    }
    if (n == 1) return CanonicalCoupling{d, 0.0, 1};
    const double o = m(0, 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (std::abs(m(i, j) - o) > kCouplingTol)
                return CouplingRejection{0, 1, i, j, o, m(i, j)};
        }
    }
    return CanonicalCoupling{d - o, o, n};
}

namespace detail {

/// True iff M commutes with the permutation matrix of pi, i.e.
/// M[i][j] == M[pi(i)][pi(j)] for all entries.
inline bool commutes_with(const Matrix& m, const std::vector<std::size_t>& pi, double tol) {
    const std::size_t n = m.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(m(i, j) - m(pi[i], pi[j])) > tol) return false;
    return true;
}

}  // namespace detail

/// Checks commutation against every permutation by brute force and against
/// the transpositions alone; the two characterizations must agree because
/// transpositions generate the full symmetric group.
inline bool commutes_with_all_permutations(const Matrix& m) {
    if (!m.is_square())
        throw std::invalid_argument("commutes_with_all_permutations: matrix must be square");
    const std::size_t n = m.rows();
    if (n > 6)
        throw std::invalid_argument(
            "commutes_with_all_permutations: C > 6 (factorial enumeration guard)");
    if (n <= 1) return true;

    bool full = true;
    std::vector<std::size_t> pi(n);
    std::iota(pi.begin(), pi.end(), std::size_t{0});
    do {
        if (!detail::commutes_with(m, pi, kCouplingTol)) {
            full = false;
            break;
        }
    } while (std::next_permutation(pi.begin(), pi.end()));

    bool swaps_only = true;
    for (std::size_t a = 0; a < n && swaps_only; ++a) {
        for (std::size_t b = a + 1; b < n && swaps_only; ++b) {
            std::iota(pi.begin(), pi.end(), std::size_t{0});
            std::swap(pi[a], pi[b]);
            if (!detail::commutes_with(m, pi, kCouplingTol)) swaps_only = false;
        }
    }

    if (full != swaps_only)
        throw std::logic_error(
            "commutes_with_all_permutations: full enumeration and transposition "
            "check disagree");
    return full;
}

inline ModeSpectrum mode_spectrum(const CanonicalCoupling& c) {
    if (c.num_vars == 0) throw std::invalid_argument("mode_spectrum: num_vars must be >= 1");
    ModeSpectrum s;
    s.lambda_diff = c.alpha;
    s.lambda_mean = c.alpha + static_cast<double>(c.num_vars) * c.beta;
    s.stable = std::abs(s.lambda_diff) < 1.0 && std::abs(s.lambda_mean) < 1.0;
    return s;
}

}  // namespace vi2d

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "vi2d/matrix.hpp"

namespace vi2d {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

namespace detail {

inline bool is_diagonal(const Matrix& a) {
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            if (r != c && a(r, c) != 0.0) return false;
    return true;
}

}  // namespace detail

/// Matrix exponential by scaling-and-squaring around an order-12 Taylor core.
/// The argument is halved until its one-norm is at most 0.5, so the truncated
/// series is accurate to well below 1e-13 before the repeated squaring.
inline Matrix mat_exp(const Matrix& a) {
    if (!a.is_square()) throw std::invalid_argument("mat_exp: matrix must be square");
    if (!a.all_finite()) throw std::domain_error("mat_exp: non-finite entry");
    const std::size_t n = a.rows();
    if (n == 0) return Matrix();

    if (detail::is_diagonal(a)) {
        Matrix e = Matrix::identity(n);
        for (std::size_t i = 0; i < n; ++i) e(i, i) = std::exp(a(i, i));
        return e;
    }

    int squarings = 0;
    double scale = 1.0;
    for (double norm = a.norm_one(); norm * scale > 0.5; ++squarings) scale *= 0.5;

    Matrix x = a * scale;
    Matrix term = Matrix::identity(n);
    Matrix sum = Matrix::identity(n);
    for (int k = 1; k <= 12; ++k) {
        term = term * x;
        term *= 1.0 / static_cast<double>(k);
        sum += term;
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

namespace detail {

inline void eigenvalues_2x2(double a, double b, double c, double d,
                            std::vector<std::complex<double>>& out) {
    const double tr = a + d;
    const double det = a * d - b * c;
    const double disc = tr * tr - 4.0 * det;
    if (disc >= 0.0) {
        const double root = std::sqrt(disc);
        const double q = 0.5 * (tr + (tr >= 0.0 ? root : -root));
        if (q != 0.0) {
            out.emplace_back(q, 0.0);
            out.emplace_back(det / q, 0.0);
        } else {
            out.emplace_back(0.5 * (tr + root), 0.0);
            out.emplace_back(0.5 * (tr - root), 0.0);
        }
    } else {
        const double im = 0.5 * std::sqrt(-disc);
        out.emplace_back(0.5 * tr, im);
        out.emplace_back(0.5 * tr, -im);
    }
}

inline void hessenberg_reduce(Matrix& h) {
    const std::size_t n = h.rows();
    if (n < 3) return;
    std::vector<double> v(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double norm = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) norm += h(i, k) * h(i, k);
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        const double alpha = h(k + 1, k) >= 0.0 ? -norm : norm;
        double vnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i] = h(i, k);
            if (i == k + 1) v[i] -= alpha;
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 == 0.0) continue;
        const double beta = 2.0 / vnorm2;
        // H <- (I - beta v v^T) H
        for (std::size_t j = k; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) s += v[i] * h(i, j);
            s *= beta;
            for (std::size_t i = k + 1; i < n; ++i) h(i, j) -= s * v[i];
        }
        // H <- H (I - beta v v^T)
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) s += h(i, j) * v[j];
            s *= beta;
            for (std::size_t j = k + 1; j < n; ++j) h(i, j) -= s * v[j];
        }
        for (std::size_t i = k + 2; i < n; ++i) h(i, k) = 0.0;
    }
}

inline std::vector<std::complex<double>> finish_eigen(std::vector<std::complex<double>>& out,
                                                      std::size_t n) {
    if (out.size() != n) throw std::logic_error("eigenvalues: internal deflation miscount");
    // Deterministic order: descending modulus, then descending real part.
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        const double ma = std::abs(a), mb = std::abs(b);
        if (ma != mb) return ma > mb;
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return out;
}

}  // namespace detail

/// All eigenvalues via Hessenberg reduction followed by implicitly shifted
/// QR iteration (Francis double shift) with deflation; 1x1 and 2x2 trailing
/// blocks are solved in closed form. The double shift keeps convergence fast
/// even when eigenvalue moduli cluster, which plain unshifted sweeps cannot
/// handle within any fixed budget. Iteration budget is 100 * n sweeps.
inline std::vector<std::complex<double>> eigenvalues(const Matrix& a) {
    if (!a.is_square()) throw std::invalid_argument("eigenvalues: matrix must be square");
    if (a.rows() > 512) throw std::invalid_argument("eigenvalues: size exceeds 512");
    if (!a.all_finite()) throw std::domain_error("eigenvalues: non-finite entry");
    const std::size_t n = a.rows();
    std::vector<std::complex<double>> out;
    out.reserve(n);
    if (n == 0) return out;
    if (n == 1) {
        out.emplace_back(a(0, 0), 0.0);
        return out;
    }

    Matrix h = a;
    detail::hessenberg_reduce(h);

    double hnorm = 0.0;  // scale reference for deflation on zero diagonals
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = (i == 0 ? 0 : i - 1); j < n; ++j) hnorm += std::abs(h(i, j));
    if (hnorm == 0.0) {
        out.assign(n, {0.0, 0.0});
        return out;
    }

    const double eps = 1e-14;
    long hi = static_cast<long>(n) - 1;
    long budget = 100 * static_cast<long>(n);
    long steps_on_block = 0;

    auto subdiag_negligible = [&](long i) {
        double scale = std::abs(h(i - 1, i - 1)) + std::abs(h(i, i));
        if (scale == 0.0) scale = hnorm;
        return std::abs(h(i, i - 1)) <= eps * scale;
    };

    while (hi >= 0) {
        if (hi == 0) {
            out.emplace_back(h(0, 0), 0.0);
            break;
        }

        // Find the active unreduced block [lo, hi].
        long lo = hi;
        while (lo > 0 && !subdiag_negligible(lo)) --lo;
        if (lo > 0) h(lo, lo - 1) = 0.0;

        if (lo == hi) {
            out.emplace_back(h(hi, hi), 0.0);
            --hi;
            steps_on_block = 0;
            continue;
        }
        if (lo == hi - 1) {
            detail::eigenvalues_2x2(h(hi - 1, hi - 1), h(hi - 1, hi), h(hi, hi - 1), h(hi, hi),
                                    out);
            hi -= 2;
            steps_on_block = 0;
            continue;
        }

        if (budget-- <= 0) {
            double residual = 0.0;
            for (long i = lo + 1; i <= hi; ++i)
                residual = std::max(residual, std::abs(h(i, i - 1)));
            throw std::runtime_error(
                "eigenvalues: QR iteration did not converge within 100*n sweeps "
                "(max active subdiagonal " +
                std::to_string(residual) + ")");
        }
        ++steps_on_block;

        // Shift polynomial from the trailing 2x2; an occasional exceptional
        // shift breaks symmetry-induced stalls.
        double shift_sum = h(hi - 1, hi - 1) + h(hi, hi);
        double shift_prod =
            h(hi - 1, hi - 1) * h(hi, hi) - h(hi - 1, hi) * h(hi, hi - 1);
        if (steps_on_block % 12 == 0) {
            const double ex = std::abs(h(hi, hi - 1)) + std::abs(h(hi - 1, hi - 2));
            shift_sum = 1.5 * ex;
            shift_prod = -0.4375 * ex * ex;
        }

        // First column of (H - aI)(H - bI) on the active block.
        double p = h(lo, lo) * h(lo, lo) + h(lo, lo + 1) * h(lo + 1, lo) -
                   shift_sum * h(lo, lo) + shift_prod;
        double q = h(lo + 1, lo) * (h(lo, lo) + h(lo + 1, lo + 1) - shift_sum);
        double r = h(lo + 1, lo) * h(lo + 2, lo + 1);
        {
            const double scale = std::abs(p) + std::abs(q) + std::abs(r);
            if (scale != 0.0) {
                p /= scale;
                q /= scale;
                r /= scale;
            }
        }

        // Chase the bulge down the block.
        for (long k = lo; k <= hi - 1; ++k) {
            const bool notlast = (k + 2 <= hi);
            double scale = 1.0;
            if (k > lo) {
                p = h(k, k - 1);
                q = h(k + 1, k - 1);
                r = notlast ? h(k + 2, k - 1) : 0.0;
                scale = std::abs(p) + std::abs(q) + std::abs(r);
                if (scale == 0.0) continue;
                p /= scale;
                q /= scale;
                r /= scale;
            }
            double norm = std::sqrt(p * p + q * q + r * r);
            if (p < 0.0) norm = -norm;
            if (norm == 0.0) continue;
            if (k > lo) {
                // The reflector maps the bulge column to (-norm*scale, 0, 0);
                // store that exactly so no stale bulge leaks into later sweeps.
                h(k, k - 1) = -norm * scale;
                h(k + 1, k - 1) = 0.0;
                if (notlast) h(k + 2, k - 1) = 0.0;
            }

            const double vp = p + norm;
            const double cx = vp / norm;
            const double cy = q / norm;
            const double cz = r / norm;
            const double qv = q / vp;
            const double rv = r / vp;

            for (long j = k; j <= hi; ++j) {
                double acc = h(k, j) + qv * h(k + 1, j);
                if (notlast) {
                    acc += rv * h(k + 2, j);
                    h(k + 2, j) -= acc * cz;
                }
                h(k, j) -= acc * cx;
                h(k + 1, j) -= acc * cy;
            }
            const long last_row = std::min(hi, k + 3);
            for (long i = lo; i <= last_row; ++i) {
                double acc = cx * h(i, k) + cy * h(i, k + 1);
                if (notlast) {
                    acc += cz * h(i, k + 2);
                    h(i, k + 2) -= acc * rv;
                }
                h(i, k) -= acc;
                h(i, k + 1) -= acc * qv;
            }
        }
    }
    return detail::finish_eigen(out, n);
}

inline double spectral_radius(const Matrix& a) {
    if (!a.is_square()) throw std::invalid_argument("spectral_radius: matrix must be square");
    if (a.rows() == 0) return 0.0;
    double best = 0.0;
    for (const auto& lambda : eigenvalues(a)) best = std::max(best, std::abs(lambda));
    return best;
}

/// One-sided spectrum of a real sequence: bins 0..floor(T/2).
struct ComplexSpectrum {
    std::size_t length = 0;  // number of retained bins
    std::vector<double> real;
    std::vector<double> imag;
};

/// Real DFT, direct O(T^2) evaluation. Angles are reduced with exact integer
/// arithmetic (k*t mod T) so bin values stay accurate for long inputs.
inline ComplexSpectrum rdft(std::span<const double> x) {
    const std::size_t t_len = x.size();
    if (t_len < 2) throw std::invalid_argument("rdft: need at least two samples");
    ComplexSpectrum s;
    s.length = t_len / 2 + 1;
    s.real.assign(s.length, 0.0);
    s.imag.assign(s.length, 0.0);
    for (std::size_t k = 0; k < s.length; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < t_len; ++t) {
            const std::size_t phase = (k * t) % t_len;
            const double angle = -2.0 * kPi * static_cast<double>(phase) / static_cast<double>(t_len);
            re += x[t] * std::cos(angle);
            im += x[t] * std::sin(angle);
        }
        s.real[k] = re;
        s.imag[k] = im;
    }
    s.imag[0] = 0.0;
    if (t_len % 2 == 0) s.imag[s.length - 1] = 0.0;
    return s;
}

/// Inverse of rdft for a real sequence of the original length.
inline std::vector<double> irdft(const ComplexSpectrum& s, std::size_t t_len) {
    if (t_len < 2) throw std::invalid_argument("irdft: need at least two samples");
    if (s.length != t_len / 2 + 1) throw std::invalid_argument("irdft: bin count mismatch");
    std::vector<double> x(t_len, 0.0);
    const bool even = (t_len % 2 == 0);
    for (std::size_t t = 0; t < t_len; ++t) {
        double acc = s.real[0];
        for (std::size_t k = 1; k + 1 < s.length || (!even && k < s.length); ++k) {
            const std::size_t phase = (k * t) % t_len;
            const double angle = 2.0 * kPi * static_cast<double>(phase) / static_cast<double>(t_len);
            acc += 2.0 * (s.real[k] * std::cos(angle) - s.imag[k] * std::sin(angle));
        }
        if (even) {
            const double sign = (t % 2 == 0) ? 1.0 : -1.0;  // cos(pi t)
            acc += s.real[s.length - 1] * sign;
        }
        x[t] = acc / static_cast<double>(t_len);
    }
    return x;
}

/// Symmetric positive definite solve via Cholesky; used by the ridge fit.
/// Throws when a pivot collapses, which signals a singular normal matrix.
inline Matrix cholesky_solve(const Matrix& a, const Matrix& b) {
    if (!a.is_square()) throw std::invalid_argument("cholesky_solve: matrix must be square");
    if (a.rows() != b.rows()) throw std::invalid_argument("cholesky_solve: rhs row mismatch");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0))
            throw std::runtime_error(
                "cholesky_solve: matrix is not positive definite; add a ridge term "
                "(lambda > 0) to regularize");
        l(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    Matrix x = b;
    const std::size_t m = b.cols();
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t ii = n; ii > 0; --ii) {
            const std::size_t i = ii - 1;
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

}  // namespace vi2d

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "oracles.hpp"
#include "vi2d/matrix.hpp"
#include "vi2d/numerics.hpp"
#include "vi2d/rng.hpp"

using Catch::Approx;
using namespace vi2d;

namespace {

Matrix random_matrix(std::size_t n, Rng& rng, double amp = 1.0) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-amp, amp);
    return m;
}

/// Orthogonal similarity built from random Givens rotations.
Matrix random_orthogonal(std::size_t n, Rng& rng) {
    Matrix q = Matrix::identity(n);
    for (std::size_t rep = 0; rep < 4 * n; ++rep) {
        const std::size_t i = rng.below(n);
        std::size_t j = rng.below(n);
        while (j == i) j = rng.below(n);
        const double theta = rng.uniform(0.0, 2.0 * kPi);
        const double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t col = 0; col < n; ++col) {
            const double a = q(i, col), b = q(j, col);
            q(i, col) = c * a + s * b;
            q(j, col) = -s * a + c * b;
        }
    }
    return q;
}

}  // namespace

TEST_CASE("mat_exp on the zero matrix is the identity") {
    const Matrix e = mat_exp(Matrix(3, 3));
    CHECK(e == Matrix::identity(3));
}

TEST_CASE("mat_exp diagonal fast path matches the scalar exponential") {
    const Matrix e = mat_exp(Matrix::diagonal({-0.5}));
    CHECK(e(0, 0) == Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(e(0, 0) == Approx(0.6065306597).margin(1e-10));
}

TEST_CASE("mat_exp of a nilpotent matrix terminates exactly") {
    const Matrix n{{0.0, 1.0}, {0.0, 0.0}};
    const Matrix e = mat_exp(n);
    CHECK(e(0, 0) == 1.0);
    CHECK(e(0, 1) == 1.0);
    CHECK(e(1, 0) == 0.0);
    CHECK(e(1, 1) == 1.0);
}

TEST_CASE("mat_exp rejects bad input") {
    CHECK_THROWS_AS(mat_exp(Matrix(2, 3)), std::invalid_argument);
    Matrix bad(2, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(mat_exp(bad), std::domain_error);
}

TEST_CASE("mat_exp inverse product returns the identity") {
    Rng rng(7);
    for (std::size_t n : {2ul, 5ul, 9ul, 16ul}) {
        const Matrix a = random_matrix(n, rng);
        Matrix minus = a;
        minus *= -1.0;
        const Matrix prod = mat_exp(a) * mat_exp(minus);
        const Matrix dev = prod - Matrix::identity(n);
        CHECK(dev.max_abs() < 1e-8);
    }
}

TEST_CASE("eigenvalues of the identity are all one") {
    const auto eigs = eigenvalues(Matrix::identity(4));
    REQUIRE(eigs.size() == 4);
    for (const auto& lambda : eigs) {
        CHECK(lambda.real() == Approx(1.0).margin(1e-12));
        CHECK(lambda.imag() == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("eigenvalues of the rank-one shifted identity match the characteristic polynomial") {
    Matrix m = Matrix::constant(3, 3, 0.1);
    for (std::size_t i = 0; i < 3; ++i) m(i, i) = 0.6;  // alpha 0.5, beta 0.1
    CHECK(std::abs(oracles::char_poly_3x3(m, 0.5)) < 1e-12);
    CHECK(std::abs(oracles::char_poly_3x3(m, 0.8)) < 1e-12);

    auto eigs = eigenvalues(m);
    std::vector<double> real;
    for (const auto& lambda : eigs) {
        CHECK(std::abs(lambda.imag()) < 1e-10);
        real.push_back(lambda.real());
    }
    std::sort(real.begin(), real.end());
    CHECK(real[0] == Approx(0.5).margin(1e-9));
    CHECK(real[1] == Approx(0.5).margin(1e-9));
    CHECK(real[2] == Approx(0.8).margin(1e-9));
}

TEST_CASE("eigenvalues of a rotation generator are a conjugate pair") {
    const Matrix m{{0.0, 1.0}, {-1.0, 0.0}};
    auto eigs = eigenvalues(m);
    REQUIRE(eigs.size() == 2);
    std::sort(eigs.begin(), eigs.end(),
              [](const auto& a, const auto& b) { return a.imag() > b.imag(); });
    CHECK(eigs[0].real() == Approx(0.0).margin(1e-12));
    CHECK(eigs[0].imag() == Approx(1.0).margin(1e-12));
    CHECK(eigs[1].imag() == Approx(-1.0).margin(1e-12));
}

TEST_CASE("spectral mapping between a matrix and its exponential") {
    Rng rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 3 + rng.below(6);  // up to 8
        std::vector<double> diag(n);
        for (std::size_t i = 0; i < n; ++i)
            diag[i] = -2.0 + 0.5 * static_cast<double>(i) + rng.uniform(-0.1, 0.1);
        const Matrix q = random_orthogonal(n, rng);
        const Matrix a = q.transpose() * Matrix::diagonal(diag) * q;

        auto eig_a = eigenvalues(a);
        auto eig_e = eigenvalues(mat_exp(a));
        std::vector<double> lhs, rhs;
        for (const auto& lambda : eig_a) lhs.push_back(std::exp(lambda.real()));
        for (const auto& lambda : eig_e) rhs.push_back(lambda.real());
        std::sort(lhs.begin(), lhs.end());
        std::sort(rhs.begin(), rhs.end());
        for (std::size_t i = 0; i < n; ++i) CHECK(lhs[i] == Approx(rhs[i]).margin(1e-6));
    }
}

TEST_CASE("spectral radius basics") {
    CHECK(spectral_radius(Matrix::identity(3)) == Approx(1.0).margin(1e-12));
    CHECK(spectral_radius(Matrix::diagonal({std::exp(-0.5)})) ==
          Approx(0.6065306597).margin(1e-10));
    Matrix m = Matrix::constant(3, 3, 0.2);
    for (std::size_t i = 0; i < 3; ++i) m(i, i) = 0.7;  // alpha 0.5, beta 0.2
    CHECK(spectral_radius(m) == Approx(1.1).margin(1e-9));
}

TEST_CASE("eigenvalues resolve clustered moduli from contractive exponentials") {
    // rho(exp(delta A)) at small delta puts every eigenvalue modulus within a
    // fraction of a percent of the others; the solver must still separate
    // them.
    Rng rng(97);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 4 + rng.below(4);
        Matrix a(n, n);
        std::vector<double> diag(n);
        for (std::size_t i = 0; i < n; ++i) {
            diag[i] = rng.uniform(-2.0, -0.3);
            a(i, i) = diag[i];
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) a(i, j) = rng.uniform(-0.05, 0.05);
        }
        for (const double delta : {0.01, 0.1, 1.0, 10.0}) {
            const double rho = spectral_radius(mat_exp(a * delta));
            CHECK(rho < 1.0);
            // Gershgorin: real parts at most max(diag) + 0.05 (n - 1) < 0.
            double bound = -3.0;
            for (std::size_t i = 0; i < n; ++i)
                bound = std::max(bound, diag[i] + 0.05 * static_cast<double>(n - 1));
            CHECK(rho <= std::exp(delta * bound) * (1.0 + 1e-6));
            CHECK(rho >= std::exp(delta * -2.1));
        }
    }
}

TEST_CASE("eigenvalues recover planted spectra under orthogonal similarity") {
    Rng rng(101);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t half = 2 + rng.below(2);
        const std::size_t n = 2 * half;
        // Planted 2x2 rotation-scale blocks: eigenvalues m e^{+-i theta}.
        Matrix block_diag(n, n);
        std::vector<std::complex<double>> want;
        for (std::size_t b = 0; b < half; ++b) {
            const double mag = rng.uniform(0.4, 2.0);
            const double theta = rng.uniform(0.2, 2.9);
            const double re = mag * std::cos(theta);
            const double im = mag * std::sin(theta);
            block_diag(2 * b, 2 * b) = re;
            block_diag(2 * b, 2 * b + 1) = im;
            block_diag(2 * b + 1, 2 * b) = -im;
            block_diag(2 * b + 1, 2 * b + 1) = re;
            want.emplace_back(re, im);
            want.emplace_back(re, -im);
        }
        const Matrix qmat = random_orthogonal(n, rng);
        const auto got = eigenvalues(qmat.transpose() * block_diag * qmat);
        REQUIRE(got.size() == n);
        auto sorted = [](std::vector<std::complex<double>> v) {
            std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
                if (a.real() != b.real()) return a.real() < b.real();
                return a.imag() < b.imag();
            });
            return v;
        };
        const auto w = sorted(want);
        const auto g = sorted(got);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(g[i].real() == Approx(w[i].real()).margin(1e-8));
            CHECK(g[i].imag() == Approx(w[i].imag()).margin(1e-8));
        }
    }
}

TEST_CASE("eigenvalues rejects oversized and non-square input") {
    CHECK_THROWS_AS(eigenvalues(Matrix(2, 3)), std::invalid_argument);
    CHECK_THROWS_AS(eigenvalues(Matrix(600, 600)), std::invalid_argument);
}

TEST_CASE("rdft of a constant signal is a pure DC bin") {
    std::vector<double> x(8, 1.5);
    const ComplexSpectrum s = rdft(x);
    REQUIRE(s.length == 5);
    CHECK(s.real[0] == Approx(12.0).margin(1e-12));
    for (std::size_t k = 1; k < s.length; ++k) {
        CHECK(std::abs(s.real[k]) < 1e-12);
        CHECK(std::abs(s.imag[k]) < 1e-12);
    }
}

TEST_CASE("rdft of a pure cosine concentrates at its bin") {
    std::vector<double> x(16);
    for (std::size_t t = 0; t < 16; ++t)
        x[t] = std::cos(2.0 * kPi * 2.0 * static_cast<double>(t) / 16.0);
    const ComplexSpectrum s = rdft(x);
    CHECK(s.real[2] == Approx(8.0).margin(1e-9));
    for (std::size_t k = 0; k < s.length; ++k) {
        if (k != 2) CHECK(std::abs(s.real[k]) < 1e-9);
        CHECK(std::abs(s.imag[k]) < 1e-9);
    }
}

TEST_CASE("rdft matches the direct definition for every length up to 64") {
    Rng rng(13);
    for (std::size_t t_len = 2; t_len <= 64; ++t_len) {
        std::vector<double> x(t_len);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        const ComplexSpectrum s = rdft(x);
        const auto reference = oracles::naive_dft(x);
        REQUIRE(s.length == reference.size());
        for (std::size_t k = 0; k < s.length; ++k) {
            CHECK(s.real[k] == Approx(reference[k].real()).margin(1e-9));
            if (k == 0 || (t_len % 2 == 0 && k + 1 == s.length))
                CHECK(s.imag[k] == 0.0);
            else
                CHECK(s.imag[k] == Approx(reference[k].imag()).margin(1e-9));
        }
    }
}

TEST_CASE("rdft round trip restores the signal") {
    Rng rng(17);
    std::vector<double> x(33);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    const auto back = irdft(rdft(x), x.size());
    for (std::size_t t = 0; t < x.size(); ++t) CHECK(back[t] == Approx(x[t]).margin(1e-9));
}

TEST_CASE("rdft needs at least two samples") {
    std::vector<double> x{1.0};
    CHECK_THROWS_AS(rdft(x), std::invalid_argument);
}

TEST_CASE("rng stream is reproducible and matches frozen reference values") {
    Rng a(42), b(42);
    const std::uint64_t expected[6] = {0xbdd732262feb6e95ull, 0x28efe333b266f103ull,
                                       0x47526757130f9f52ull, 0x581ce1ff0e4ae394ull,
                                       0x09bc585a244823f2ull, 0xde4431fa3c80db06ull};
    for (const std::uint64_t want : expected) {
        const std::uint64_t got = a.next_u64();
        CHECK(got == want);
        CHECK(got == b.next_u64());
    }
}

TEST_CASE("rng children are decorrelated from the parent and each other") {
    const Rng parent(42);
    Rng c0 = parent.child(0);
    Rng c1 = parent.child(1);
    CHECK(c0.next_u64() != c1.next_u64());
    Rng c0_again = parent.child(0);
    Rng c0_ref = parent.child(0);
    CHECK(c0_again.next_u64() == c0_ref.next_u64());
}

TEST_CASE("cholesky solve round trips a planted system and rejects indefinite input") {
    Rng rng(23);
    const std::size_t n = 6;
    Matrix b = random_matrix(n, rng);
    Matrix spd = b * b.transpose();
    for (std::size_t i = 0; i < n; ++i) spd(i, i) += 1.0;
    const Matrix x_true = random_matrix(n, rng);
    const Matrix rhs = spd * x_true;
    const Matrix x = cholesky_solve(spd, rhs);
    CHECK((x - x_true).max_abs() < 1e-9);

    Matrix indefinite = Matrix::identity(2);
    indefinite(1, 1) = -1.0;
    CHECK_THROWS_AS(cholesky_solve(indefinite, Matrix(2, 1)), std::runtime_error);
}

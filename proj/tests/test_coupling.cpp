#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "vi2d/coupling.hpp"
#include "vi2d/numerics.hpp"
#include "vi2d/rng.hpp"

using Catch::Approx;
using namespace vi2d;

TEST_CASE("build_canonical basic shapes") {
    CHECK(build_canonical({1.0, 0.0, 3}) == Matrix::identity(3));

    const Matrix m = build_canonical({0.5, 0.1, 2});
    CHECK(m(0, 0) == Approx(0.6));
    CHECK(m(0, 1) == Approx(0.1));
    CHECK(m(1, 0) == Approx(0.1));
    CHECK(m(1, 1) == Approx(0.6));
}

TEST_CASE("shared diagonal and off-diagonal values map to alpha = d - o, beta = o") {
    Matrix m = Matrix::constant(4, 4, 0.2);
    for (std::size_t i = 0; i < 4; ++i) m(i, i) = 0.7;
    const auto result = decompose_to_canonical(m);
    const auto* c = std::get_if<CanonicalCoupling>(&result);
    REQUIRE(c != nullptr);
    CHECK(c->alpha == Approx(0.5));
    CHECK(c->beta == Approx(0.2));
}

TEST_CASE("decompose_to_canonical accepts the identity and inverts build_canonical") {
    const auto id = decompose_to_canonical(Matrix::identity(4));
    const auto* c = std::get_if<CanonicalCoupling>(&id);
    REQUIRE(c != nullptr);
    CHECK(c->alpha == 1.0);
    CHECK(c->beta == 0.0);

    const auto back = decompose_to_canonical(Matrix{{0.6, 0.1}, {0.1, 0.6}});
    const auto* cb = std::get_if<CanonicalCoupling>(&back);
    REQUIRE(cb != nullptr);
    CHECK(cb->alpha == Approx(0.5));
    CHECK(cb->beta == Approx(0.1));
}

TEST_CASE("decompose_to_canonical reports the first asymmetric pair") {
    const auto result = decompose_to_canonical(Matrix{{0.6, 0.1}, {0.2, 0.6}});
    const auto* rejection = std::get_if<CouplingRejection>(&result);
    REQUIRE(rejection != nullptr);
    CHECK(rejection->row_a == 0);
    CHECK(rejection->col_a == 1);
    CHECK(rejection->row_b == 1);
    CHECK(rejection->col_b == 0);
    CHECK(rejection->value_a == Approx(0.1));
    CHECK(rejection->value_b == Approx(0.2));
}

TEST_CASE("commutation with every permutation") {
    CHECK(commutes_with_all_permutations(build_canonical({0.3, -0.05, 4})));
    CHECK_FALSE(commutes_with_all_permutations(Matrix{{1.0, 2.0}, {3.0, 4.0}}));
    CHECK(commutes_with_all_permutations(Matrix{{7.25}}));
    CHECK_THROWS_AS(commutes_with_all_permutations(Matrix(7, 7)), std::invalid_argument);
}

TEST_CASE("mode spectrum closed forms") {
    const ModeSpectrum decoupled = mode_spectrum({0.9, 0.0, 10});
    CHECK(decoupled.lambda_diff == Approx(0.9));
    CHECK(decoupled.lambda_mean == Approx(0.9));
    CHECK(decoupled.stable);

    const ModeSpectrum stable = mode_spectrum({0.5, 0.1, 4});
    CHECK(stable.lambda_diff == Approx(0.5));
    CHECK(stable.lambda_mean == Approx(0.9));
    CHECK(stable.stable);

    const ModeSpectrum unstable = mode_spectrum({0.5, 0.2, 3});
    CHECK(unstable.lambda_mean == Approx(1.1));
    CHECK_FALSE(unstable.stable);
}

TEST_CASE("mode spectrum agrees with the dense eigensolver") {
    Rng rng(31);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t c_count = 2 + rng.below(4);
        const CanonicalCoupling coupling{rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5), c_count};
        const ModeSpectrum modes = mode_spectrum(coupling);

        auto eigs = eigenvalues(build_canonical(coupling));
        std::vector<double> got;
        for (const auto& lambda : eigs) {
            CHECK(std::abs(lambda.imag()) < 1e-10);
            got.push_back(lambda.real());
        }
        std::sort(got.begin(), got.end());
        std::vector<double> want(c_count - 1, modes.lambda_diff);
        want.push_back(modes.lambda_mean);
        std::sort(want.begin(), want.end());
        for (std::size_t i = 0; i < c_count; ++i) CHECK(got[i] == Approx(want[i]).margin(1e-9));
    }
}

TEST_CASE("round trip through decomposition is exact") {
    // Exactness holds whenever alpha + beta incurs no rounding, so the draws
    // live on a dyadic grid; arbitrary reals round trip to one ulp.
    Rng rng(37);
    auto dyadic = [&](double lo, double hi) {
        const double step = std::ldexp(1.0, -20);
        const auto cells = static_cast<std::uint64_t>((hi - lo) / step);
        return lo + step * static_cast<double>(rng.below(cells + 1));
    };
    for (int rep = 0; rep < 50; ++rep) {
        const CanonicalCoupling coupling{dyadic(-2.0, 2.0), dyadic(-1.0, 1.0), 2 + rng.below(5)};
        const auto result = decompose_to_canonical(build_canonical(coupling));
        const auto* back = std::get_if<CanonicalCoupling>(&result);
        REQUIRE(back != nullptr);
        CHECK(*back == coupling);
    }
    for (int rep = 0; rep < 50; ++rep) {
        const CanonicalCoupling coupling{rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0),
                                         2 + rng.below(5)};
        const auto result = decompose_to_canonical(build_canonical(coupling));
        const auto* back = std::get_if<CanonicalCoupling>(&result);
        REQUIRE(back != nullptr);
        CHECK(back->alpha == Approx(coupling.alpha).margin(1e-12));
        CHECK(back->beta == coupling.beta);
        CHECK(back->num_vars == coupling.num_vars);
    }
    // One variable cannot separate self weight from pooled weight: the
    // decomposition returns the canonical representative (alpha + beta, 0).
    const auto single = decompose_to_canonical(build_canonical({0.25, 0.5, 1}));
    const auto* c1 = std::get_if<CanonicalCoupling>(&single);
    REQUIRE(c1 != nullptr);
    CHECK(c1->alpha == 0.75);
    CHECK(c1->beta == 0.0);
    CHECK(c1->num_vars == 1);
}

TEST_CASE("commutation and canonical decomposition accept the same matrices") {
    Rng rng(41);
    for (std::size_t c_count = 2; c_count <= 4; ++c_count) {
        for (int rep = 0; rep < 80; ++rep) {
            Matrix m(c_count, c_count);
            if (rep % 2 == 0) {
                for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
            } else {
                m = build_canonical({rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5), c_count});
                if (rep % 4 == 1) m(c_count - 1, 0) += 1e-3;
            }
            const bool commutes = commutes_with_all_permutations(m);
            const bool accepted =
                std::holds_alternative<CanonicalCoupling>(decompose_to_canonical(m));
            CHECK(commutes == accepted);
        }
    }
}

TEST_CASE("zero-sum vectors are eigenvectors with eigenvalue alpha") {
    Rng rng(43);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t c_count = 2 + rng.below(4);
        const CanonicalCoupling coupling{rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5), c_count};
        const Matrix m = build_canonical(coupling);
        for (std::size_t k = 0; k + 1 < c_count; ++k) {
            std::vector<double> v(c_count, 0.0);
            v[k] = 1.0;
            v[k + 1] = -1.0;
            const auto mapped = mat_vec(m, v);
            for (std::size_t i = 0; i < c_count; ++i)
                CHECK(std::abs(mapped[i] - coupling.alpha * v[i]) < 1e-10);
        }
    }
}

TEST_CASE("degenerate coupling inputs are rejected") {
    CHECK_THROWS_AS(build_canonical({1.0, 0.0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(mode_spectrum({1.0, 0.0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(decompose_to_canonical(Matrix(2, 3)), std::invalid_argument);
}

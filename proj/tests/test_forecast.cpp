#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vi2d/forecast.hpp"
#include "vi2d/rng.hpp"
#include "vi2d/sim.hpp"

using Catch::Approx;
using namespace vi2d;

TEST_CASE("forecasting a quiet network process beats the persistence baseline") {
    Rng rng(3);
    const sim::Graph g = sim::watts_strogatz(12, 4, 0.1, rng);
    const MultivariateSeries x = sim::var1_generate(g, 240, 0.05, rng);
    ForecastConfig cfg;
    cfg.d_h = cfg.d_v = cfg.d_psi = 4;
    const ForecastResult r = forecast_series(x, cfg);
    CHECK(r.model.mse < r.persistence.mse);
}

TEST_CASE("a constant series forecasts itself") {
    MultivariateSeries x(3, 60);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t t = 0; t < 60; ++t) x(c, t) = 2.0 + static_cast<double>(c);
    ForecastConfig cfg;
    cfg.d_h = cfg.d_v = cfg.d_psi = 3;
    const ForecastResult r = forecast_series(x, cfg);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t k = 0; k < r.predictions.cols(); ++k)
            CHECK(r.predictions(c, k) == Approx(2.0 + static_cast<double>(c)).margin(1e-6));
}

TEST_CASE("shuffling the variables only shuffles the forecast rows") {
    Rng rng(7);
    const std::size_t num_vars = 6;
    const sim::Graph g = sim::watts_strogatz(num_vars, 2, 0.2, rng);
    const MultivariateSeries x = sim::var1_generate(g, 160, 0.1, rng);
    ForecastConfig cfg;
    cfg.d_h = cfg.d_v = cfg.d_psi = 3;

    const auto pi = rng.permutation(num_vars);
    MultivariateSeries xp(num_vars, x.cols());
    for (std::size_t c = 0; c < num_vars; ++c)
        for (std::size_t t = 0; t < x.cols(); ++t) xp(c, t) = x(pi[c], t);

    const ForecastResult base = forecast_series(x, cfg);
    const ForecastResult perm = forecast_series(xp, cfg);
    REQUIRE(perm.predictions.cols() == base.predictions.cols());
    for (std::size_t c = 0; c < num_vars; ++c)
        for (std::size_t k = 0; k < base.predictions.cols(); ++k)
            REQUIRE(perm.predictions(c, k) == base.predictions(pi[c], k));
    CHECK(perm.model.mae == base.model.mae);
    CHECK(perm.model.mse == base.model.mse);
}

TEST_CASE("forecast rejects series too short to split") {
    ForecastConfig cfg;
    CHECK_THROWS_AS(forecast_series(MultivariateSeries(2, 3), cfg), std::invalid_argument);
}

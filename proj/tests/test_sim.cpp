#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "vi2d/rng.hpp"
#include "vi2d/sim.hpp"

using Catch::Approx;
using namespace vi2d;
using namespace vi2d::sim;

TEST_CASE("unrewired ring lattice") {
    Rng rng(3);
    const Graph g = watts_strogatz(8, 2, 0.0, rng);
    CHECK(g.num_nodes == 8);
    REQUIRE(g.edges.size() == 8);
    std::vector<std::size_t> degree(8, 0);
    for (const auto& [a, b] : g.edges) {
        ++degree[a];
        ++degree[b];
        CHECK((b == (a + 1) % 8 || a == (b + 1) % 8));
    }
    for (std::size_t d : degree) CHECK(d == 2);
}

TEST_CASE("rewiring preserves the edge count and forbids self-loops and duplicates") {
    Rng rng(5);
    for (int seed = 0; seed < 100; ++seed) {
        Rng local = rng.child(seed);
        const double p = local.uniform();
        const Graph g = watts_strogatz(16, 4, p, local);
        CHECK(g.edges.size() == 32);  // C k / 2
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& [a, b] : g.edges) {
            CHECK(a != b);
            CHECK(a < b);
            CHECK(seen.insert({a, b}).second);
        }
    }
}

TEST_CASE("watts_strogatz validates parameters") {
    Rng rng(7);
    CHECK_THROWS_AS(watts_strogatz(8, 3, 0.1, rng), std::domain_error);   // odd degree
    CHECK_THROWS_AS(watts_strogatz(4, 4, 0.1, rng), std::domain_error);   // degree >= C
    CHECK_THROWS_AS(watts_strogatz(8, 2, 1.5, rng), std::domain_error);   // bad probability
}

TEST_CASE("transition matrix is row stochastic scaled to the target radius") {
    Rng rng(11);
    const Graph g = watts_strogatz(12, 4, 0.2, rng);
    const VarProcess p = make_var_process(g, 0.1);
    CHECK(p.spectral_radius == 0.9);
    for (std::size_t i = 0; i < 12; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < 12; ++j) row_sum += p.transition(i, j);
        CHECK(row_sum == Approx(0.9).margin(1e-12));
    }
    CHECK(spectral_radius(p.transition) == Approx(0.9).margin(1e-8));
}

TEST_CASE("zero noise from a zero start stays identically zero") {
    Rng rng(13);
    const Graph g = watts_strogatz(8, 2, 0.1, rng);
    const MultivariateSeries x = var1_generate(g, 50, 0.0, rng);
    CHECK(x.max_abs() == 0.0);
}

TEST_CASE("lag-one autocovariance matches the Lyapunov fixed point") {
    Rng rng(17);
    const Graph g = watts_strogatz(12, 4, 0.2, rng);
    const VarProcess process = make_var_process(g, 0.1);
    const std::size_t t_len = 100000;
    const MultivariateSeries x = var1_generate(process, t_len, rng);

    const std::size_t n = 12;
    Matrix gamma0(n, n), gamma1(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s0 = 0.0, s1 = 0.0;
            for (std::size_t t = 0; t + 1 < t_len; ++t) {
                s0 += x(i, t) * x(j, t);
                s1 += x(i, t + 1) * x(j, t);
            }
            gamma0(i, j) = s0 / static_cast<double>(t_len - 1);
            gamma1(i, j) = s1 / static_cast<double>(t_len - 1);
        }
    }
    const Matrix gamma0_exact = oracles::lyapunov_covariance(process.transition, 0.1);
    const Matrix gamma1_pred = process.transition * gamma0;
    CHECK((gamma0 - gamma0_exact).norm_frobenius() / gamma0_exact.norm_frobenius() < 0.1);
    CHECK((gamma1 - gamma1_pred).norm_frobenius() / std::max(1e-12, gamma1_pred.norm_frobenius()) <
          0.1);
}

TEST_CASE("long trajectories stay bounded at radius 0.9") {
    Rng rng(19);
    const Graph g = watts_strogatz(8, 2, 0.1, rng);
    const MultivariateSeries x = var1_generate(g, 100000, 0.1, rng);
    CHECK(x.all_finite());
    CHECK(x.max_abs() < 10.0);
}

TEST_CASE("ridge recovers identity, a planted map, and shrinks to zero") {
    Rng rng(23);
    const std::size_t n = 200, d = 6;
    Matrix f(n, d);
    for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1.0, 1.0);

    const Matrix w_identity = fit_ridge_readout(f, f, 0.0);
    CHECK((w_identity - Matrix::identity(d)).max_abs() < 1e-8);

    Matrix w_true(d, 2);
    for (std::size_t i = 0; i < w_true.size(); ++i) w_true.data()[i] = rng.uniform(-2.0, 2.0);
    const Matrix w_fit = fit_ridge_readout(f, f * w_true, 0.0);
    CHECK((w_fit - w_true).max_abs() < 1e-6);

    const Matrix w_heavy = fit_ridge_readout(f, f * w_true, 1e9);
    CHECK(w_heavy.norm_frobenius() < 1e-6 * w_fit.norm_frobenius());
}

TEST_CASE("ridge reports singular normal equations at lambda zero") {
    Matrix f(3, 2);
    f(0, 0) = 1.0;
    f(1, 0) = 2.0;
    f(2, 0) = 3.0;  // second column all zero: rank deficient
    CHECK_THROWS_WITH(fit_ridge_readout(f, Matrix(3, 1), 0.0),
                      Catch::Matchers::ContainsSubstring("lambda"));
}

TEST_CASE("metric formulas on tiny examples") {
    MultivariateSeries pred(1, 2), truth(1, 2);
    pred(0, 0) = 1.0;
    pred(0, 1) = 2.0;
    truth(0, 0) = 1.0;
    truth(0, 1) = 3.0;
    const Metrics m = metrics(pred, truth);
    CHECK(m.mae == Approx(0.5));
    CHECK(m.mse == Approx(0.5));

    const Metrics zero = metrics(truth, truth);
    CHECK(zero.mae == 0.0);
    CHECK(zero.mape == 0.0);
    CHECK(zero.mse == 0.0);

    MultivariateSeries t0(1, 1), p0(1, 1);
    t0(0, 0) = 0.0;
    p0(0, 0) = 0.5;
    CHECK(std::isfinite(metrics(p0, t0).mape));

    CHECK_THROWS_AS(metrics(pred, MultivariateSeries(2, 2)), std::invalid_argument);
}

TEST_CASE("metrics are invariant to variable ordering") {
    Rng rng(29);
    const std::size_t num_vars = 7, t_len = 13;
    MultivariateSeries pred(num_vars, t_len), truth(num_vars, t_len);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pred.data()[i] = rng.uniform(-2.0, 2.0);
        truth.data()[i] = rng.uniform(-2.0, 2.0);
    }
    const Metrics base = metrics(pred, truth);
    const auto pi = rng.permutation(num_vars);
    MultivariateSeries pred_p(num_vars, t_len), truth_p(num_vars, t_len);
    for (std::size_t c = 0; c < num_vars; ++c)
        for (std::size_t t = 0; t < t_len; ++t) {
            pred_p(c, t) = pred(pi[c], t);
            truth_p(c, t) = truth(pi[c], t);
        }
    const Metrics perm = metrics(pred_p, truth_p);
    CHECK(perm.mae == base.mae);
    CHECK(perm.mape == base.mape);
    CHECK(perm.mse == base.mse);
}

TEST_CASE("permutation study: the coupled engine has exactly zero spread") {
    StudyConfig cfg;
    cfg.num_vars = 12;
    cfg.num_steps = 120;
    cfg.d_h = 4;
    cfg.d_v = 4;
    cfg.d_psi = 4;
    Rng rng(31);
    const StudyReport report = run_permutation_study(cfg, 4, rng);

    REQUIRE(report.rows.size() == 8);  // two engines, four trials
    const EngineAggregate* vi_agg = nullptr;
    const EngineAggregate* ordered_agg = nullptr;
    for (const auto& agg : report.aggregates) {
        if (agg.engine == "vi") vi_agg = &agg;
        if (agg.engine == "ordered") ordered_agg = &agg;
    }
    REQUIRE(vi_agg != nullptr);
    REQUIRE(ordered_agg != nullptr);
    CHECK(vi_agg->stddev.mae == 0.0);
    CHECK(vi_agg->stddev.mape == 0.0);
    CHECK(vi_agg->stddev.mse == 0.0);
    CHECK(ordered_agg->stddev.mae > 0.0);
}

TEST_CASE("permutation study is deterministic given the seed") {
    StudyConfig cfg;
    cfg.num_vars = 8;
    cfg.num_steps = 80;
    cfg.d_h = 3;
    cfg.d_v = 3;
    cfg.d_psi = 3;
    Rng rng_a(7), rng_b(7);
    const StudyReport a = run_permutation_study(cfg, 2, rng_a);
    const StudyReport b = run_permutation_study(cfg, 2, rng_b);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].metrics.mae == b.rows[i].metrics.mae);
        CHECK(a.rows[i].metrics.mape == b.rows[i].metrics.mape);
        CHECK(a.rows[i].metrics.mse == b.rows[i].metrics.mse);
    }
}

TEST_CASE("cscaling study rejects variable counts outside the supported set") {
    StudyConfig cfg;
    Rng rng(37);
    CHECK_THROWS_AS(run_cscaling_study({10}, cfg, rng), std::invalid_argument);
}

TEST_CASE("forecast pipeline beats persistence on the stationary task") {
    StudyConfig cfg;
    cfg.num_vars = 16;
    cfg.num_steps = 300;
    cfg.d_h = 4;
    cfg.d_v = 4;
    cfg.d_psi = 4;
    Rng rng(41);
    Rng data_rng = rng.child(1);
    Rng sys_rng = rng.child(2);
    const Graph g = watts_strogatz(cfg.num_vars, cfg.ws_degree, cfg.ws_rewire, data_rng);
    const MultivariateSeries series =
        var1_generate(g, cfg.num_steps, cfg.noise_sigma, data_rng, cfg.burn_in);
    const ContinuousSystem sys = sample_system(cfg.d_h, cfg.d_v, cfg.d_psi, sys_rng);
    const DiscreteSystem dsys = discretize_zoh(sys, cfg.delta);
    const PipelineResult r = run_forecast_pipeline(Engine::vi, dsys, {sys.c_h, sys.c_v}, sys.w_v,
                                                   AggregatorSpec::mean_pool(), series, cfg);
    CHECK(r.model.mse < 0.8 * r.persistence.mse);
}

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "vi2d/branches.hpp"
#include "vi2d/matrix.hpp"
#include "vi2d/rng.hpp"
#include "vi2d/sim.hpp"
#include "vi2d/ssm.hpp"

namespace vi2d {

/// End-to-end one-step-ahead forecaster: per-variable normalization from the
/// training split, the three-branch composition with gated fusion, and a
/// variable-shared ridge readout. Every stage commutes with variable
/// permutations, so shuffling the input rows only shuffles the output rows.
struct ForecastConfig {
    BranchConfig branches;
    AggregatorKind aggregator = AggregatorKind::mean;
    double ridge_lambda = 1e-3;
    double train_fraction = 0.8;
    std::uint64_t seed = 42;
    std::size_t d_h = 8;
    std::size_t d_v = 8;
    std::size_t d_psi = 8;
};

struct ForecastResult {
    MultivariateSeries predictions;  // C x test steps, original units
    MultivariateSeries test_truth;   // C x test steps
    sim::Metrics model;
    sim::Metrics persistence;
    std::size_t train_steps = 0;
};

inline ForecastResult forecast_series(const MultivariateSeries& x, const ForecastConfig& cfg) {
    cfg.branches.validate();
    if (!(cfg.ridge_lambda >= 0.0)) throw std::domain_error("forecast: lambda must be >= 0");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw std::domain_error("forecast: train fraction must lie in (0, 1)");
    const std::size_t num_vars = x.rows();
    const std::size_t num_steps = x.cols();
    const std::size_t t_train =
        static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(num_steps)));
    if (t_train < 2 || t_train >= num_steps)
        throw std::invalid_argument("forecast: series too short for the train/test split");

    // Normalization statistics come from the training region only.
    std::vector<double> mu(num_vars, 0.0), sigma(num_vars, 1.0);
    MultivariateSeries normalized(num_vars, num_steps);
    for (std::size_t c = 0; c < num_vars; ++c) {
        double mean = 0.0;
        for (std::size_t t = 0; t < t_train; ++t) mean += x(c, t);
        mean /= static_cast<double>(t_train);
        double var = 0.0;
        for (std::size_t t = 0; t < t_train; ++t) var += (x(c, t) - mean) * (x(c, t) - mean);
        var /= static_cast<double>(t_train);
        mu[c] = mean;
        sigma[c] = std::sqrt(var);
        if (sigma[c] < 1e-12) sigma[c] = 1.0;
        for (std::size_t t = 0; t < num_steps; ++t) normalized(c, t) = (x(c, t) - mu[c]) / sigma[c];
    }

    Rng rng(cfg.seed);
    const ContinuousSystem sys = sample_system(cfg.d_h, cfg.d_v, cfg.d_psi, rng);
    const AggregatorSpec agg = sim::sample_aggregator(cfg.aggregator, cfg.d_psi, rng);
    const BranchOutputs branches = run_branches(sys, cfg.branches, agg, normalized);
    const GateParams gate;  // neutral gate: equal mixing
    const Matrix fused = fuse(gate, branches.h_long, branches.h_short, branches.h_spec);

    const std::size_t dim = 6;
    auto feature_row = [&](std::size_t c, std::size_t t, std::span<double> f) {
        f[0] = branches.h_long(c, t);
        f[1] = branches.h_short(c, t);
        f[2] = branches.h_spec(c, t);
        f[3] = fused(c, t);
        f[4] = normalized(c, t);
        f[5] = 1.0;
    };

    sim::EquivariantRidge ridge;
    Matrix fc(t_train - 1, dim), yc(t_train - 1, 1);
    for (std::size_t c = 0; c < num_vars; ++c) {
        for (std::size_t t = 0; t + 1 < t_train; ++t) {
            feature_row(c, t, fc.row(t));
            yc(t, 0) = normalized(c, t + 1);
        }
        ridge.add_variable(fc, yc);
    }
    const Matrix weights = ridge.solve(cfg.ridge_lambda);

    const std::size_t t_test = num_steps - t_train;
    ForecastResult result;
    result.train_steps = t_train;
    result.predictions = MultivariateSeries(num_vars, t_test);
    result.test_truth = MultivariateSeries(num_vars, t_test);
    MultivariateSeries persistence(num_vars, t_test);
    std::vector<double> f(dim);
    for (std::size_t c = 0; c < num_vars; ++c) {
        for (std::size_t k = 0; k < t_test; ++k) {
            const std::size_t t = t_train - 1 + k;  // features at t predict t + 1
            feature_row(c, t, f);
            const double yn = dot(f, std::span<const double>(weights.data(), dim));
            result.predictions(c, k) = mu[c] + sigma[c] * yn;
            result.test_truth(c, k) = x(c, t + 1);
            persistence(c, k) = x(c, t);
        }
    }
    result.model = sim::metrics(result.predictions, result.test_truth);
    result.persistence = sim::metrics(persistence, result.test_truth);
    return result;
}

}  // namespace vi2d

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vi2d/aggregation.hpp"
#include "vi2d/matrix.hpp"
#include "vi2d/numerics.hpp"
#include "vi2d/rng.hpp"
#include "vi2d/scan.hpp"
#include "vi2d/ssm.hpp"

namespace vi2d::sim {

// ---------------------------------------------------------------------------
// Watts-Strogatz graphs and VAR(1) data.
// ---------------------------------------------------------------------------

struct Graph {
    std::size_t num_nodes = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // unordered pairs, a < b
};

/// Ring lattice of even degree k with each edge's far endpoint rewired
/// independently with probability p. Rewiring never drops an edge, so the
/// edge count is always num_nodes * k / 2.
inline Graph watts_strogatz(std::size_t num_nodes, std::size_t degree, double rewire_prob,
                            Rng& rng) {
    if (degree % 2 != 0) throw std::domain_error("watts_strogatz: degree must be even");
    if (degree >= num_nodes) throw std::domain_error("watts_strogatz: degree must be below C");
    if (!(rewire_prob >= 0.0 && rewire_prob <= 1.0))
        throw std::domain_error("watts_strogatz: rewire probability must lie in [0, 1]");

    std::vector<bool> adj(num_nodes * num_nodes, false);
    auto connected = [&](std::size_t a, std::size_t b) { return adj[a * num_nodes + b]; };
    auto set_edge = [&](std::size_t a, std::size_t b, bool on) {
        adj[a * num_nodes + b] = on;
        adj[b * num_nodes + a] = on;
    };

    for (std::size_t i = 0; i < num_nodes; ++i)
        for (std::size_t off = 1; off <= degree / 2; ++off)
            set_edge(i, (i + off) % num_nodes, true);

    std::vector<std::size_t> deg(num_nodes, degree);
    for (std::size_t i = 0; i < num_nodes; ++i) {
        for (std::size_t off = 1; off <= degree / 2; ++off) {
            const std::size_t j = (i + off) % num_nodes;
            if (rng.uniform() >= rewire_prob) continue;
            if (deg[i] >= num_nodes - 1) continue;  // no free endpoint left
            std::size_t target = rng.below(num_nodes);
            while (target == i || connected(i, target)) target = rng.below(num_nodes);
            set_edge(i, j, false);
            set_edge(i, target, true);
            --deg[j];
            ++deg[target];
        }
    }

    Graph g;
    g.num_nodes = num_nodes;
    for (std::size_t a = 0; a < num_nodes; ++a)
        for (std::size_t b = a + 1; b < num_nodes; ++b)
            if (connected(a, b)) g.edges.emplace_back(a, b);
    return g;
}

/// Stationary VAR(1) transition built from a graph: the row-normalized
/// adjacency is row stochastic, so scaling it by 0.9 pins the spectral
/// radius at 0.9.
struct VarProcess {
    Matrix transition;      // C x C
    double noise_sigma = 0.1;
    double spectral_radius = 0.9;
};

inline VarProcess make_var_process(const Graph& g, double noise_sigma, double target_radius = 0.9) {
    if (!(noise_sigma >= 0.0)) throw std::domain_error("make_var_process: negative noise");
    if (!(target_radius > 0.0 && target_radius < 1.0))
        throw std::domain_error("make_var_process: spectral radius must lie in (0, 1)");
    const std::size_t n = g.num_nodes;
    std::vector<std::size_t> deg(n, 0);
    for (const auto& [a, b] : g.edges) {
        ++deg[a];
        ++deg[b];
    }
    for (std::size_t i = 0; i < n; ++i)
        if (deg[i] == 0)
            throw std::domain_error("make_var_process: isolated node, transition row undefined");

    VarProcess p;
    p.transition = Matrix(n, n);
    for (const auto& [a, b] : g.edges) {
        p.transition(a, b) = target_radius / static_cast<double>(deg[a]);
        p.transition(b, a) = target_radius / static_cast<double>(deg[b]);
    }
    p.noise_sigma = noise_sigma;
    p.spectral_radius = target_radius;
    return p;
}

/// Simulates x[t] = W x[t-1] + noise from a zero start, discards `burn_in`
/// steps and returns the next num_steps columns.
inline MultivariateSeries var1_generate(const VarProcess& process, std::size_t num_steps, Rng& rng,
                                        std::size_t burn_in = 200) {
    if (num_steps < 2) throw std::domain_error("var1_generate: need at least two steps");
    const std::size_t n = process.transition.rows();
    MultivariateSeries out(n, num_steps);
    std::vector<double> state(n, 0.0), next(n, 0.0);
    for (std::size_t t = 0; t < burn_in + num_steps; ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        add_mat_vec(process.transition, state, next);
        for (std::size_t c = 0; c < n; ++c) next[c] += process.noise_sigma * rng.normal();
        std::swap(state, next);
        if (t >= burn_in)
            for (std::size_t c = 0; c < n; ++c) out(c, t - burn_in) = state[c];
    }
    return out;
}

inline MultivariateSeries var1_generate(const Graph& g, std::size_t num_steps, double noise_sigma,
                                        Rng& rng, std::size_t burn_in = 200) {
    return var1_generate(make_var_process(g, noise_sigma), num_steps, rng, burn_in);
}

// ---------------------------------------------------------------------------
// Ridge readout and metrics.
// ---------------------------------------------------------------------------

/// Minimizes |F W - Y|^2 + lambda |W|^2 through the normal equations.
inline Matrix fit_ridge_readout(const Matrix& features, const Matrix& targets, double lambda) {
    if (features.rows() == 0) throw std::invalid_argument("fit_ridge_readout: no samples");
    if (features.rows() != targets.rows())
        throw std::invalid_argument("fit_ridge_readout: sample count mismatch");
    if (!(lambda >= 0.0)) throw std::domain_error("fit_ridge_readout: lambda must be >= 0");
    const std::size_t d = features.cols();
    Matrix gram(d, d);
    for (std::size_t n = 0; n < features.rows(); ++n) {
        const auto f = features.row(n);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) gram(i, j) += f[i] * f[j];
    }
    for (std::size_t i = 0; i < d; ++i) gram(i, i) += lambda;
    const Matrix rhs = features.transpose() * targets;
    return cholesky_solve(gram, rhs);
}

struct Metrics {
    double mae = 0.0;
    double mape = 0.0;
    double mse = 0.0;
};

/// Error metrics averaged over all entries. Per-variable partial sums are
/// accumulated in time order and combined across variables with a sorted
/// tree reduction, so the result does not depend on the variable ordering.
inline Metrics metrics(const MultivariateSeries& pred, const MultivariateSeries& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw std::invalid_argument("metrics: shape mismatch");
    if (pred.rows() == 0 || pred.cols() == 0) throw std::invalid_argument("metrics: empty input");
    const std::size_t c_count = pred.rows();
    std::vector<double> mae_rows(c_count), mape_rows(c_count), mse_rows(c_count);
    for (std::size_t c = 0; c < c_count; ++c) {
        double mae = 0.0, mape = 0.0, mse = 0.0;
        for (std::size_t t = 0; t < pred.cols(); ++t) {
            const double err = pred(c, t) - truth(c, t);
            mae += std::abs(err);
            mse += err * err;
            mape += 100.0 * std::abs(err) / std::max(std::abs(truth(c, t)), 1e-8);
        }
        mae_rows[c] = mae;
        mape_rows[c] = mape;
        mse_rows[c] = mse;
    }
    const double count = static_cast<double>(pred.rows() * pred.cols());
    auto combine = [&](std::vector<double>& rows) {
        std::sort(rows.begin(), rows.end());
        return vi2d::detail::tree_reduce(rows) / count;
    };
    return {combine(mae_rows), combine(mape_rows), combine(mse_rows)};
}

// ---------------------------------------------------------------------------
// Forecasting pipeline: fixed-feature scan plus ridge readout.
// ---------------------------------------------------------------------------

enum class Engine { vi, ordered };

inline const char* engine_name(Engine e) { return e == Engine::vi ? "vi" : "ordered"; }

struct StudyConfig {
    std::size_t num_vars = 64;
    std::size_t num_steps = 1000;
    std::size_t ws_degree = 4;
    double ws_rewire = 0.1;
    double noise_sigma = 0.1;
    std::size_t burn_in = 200;

    std::size_t d_h = 8;
    std::size_t d_v = 8;
    std::size_t d_psi = 8;
    double delta = 0.1;
    AggregatorKind aggregator = AggregatorKind::mean;

    double ridge_lambda = 1e-3;
    double train_fraction = 0.8;
    std::size_t bench_repeats = 5;
    Schedule vi_schedule = Schedule::serial_ascending;
};

inline AggregatorSpec sample_aggregator(AggregatorKind kind, std::size_t d_psi, Rng& rng) {
    switch (kind) {
        case AggregatorKind::mean: return AggregatorSpec::mean_pool();
        case AggregatorKind::sum: return AggregatorSpec::sum_pool();
        case AggregatorKind::attention: {
            std::vector<double> query(d_psi);
            for (double& q : query) q = rng.uniform(-1.0, 1.0);
            Matrix key(d_psi, d_psi);
            for (std::size_t i = 0; i < key.size(); ++i) key.data()[i] = rng.uniform(-0.5, 0.5);
            return AggregatorSpec::attention_pool(std::move(query), std::move(key), 1.0);
        }
    }
    throw std::logic_error("sample_aggregator: unknown kind");
}

struct PipelineResult {
    Metrics model;
    Metrics persistence;
    MultivariateSeries predictions;  // C x (test steps)
    MultivariateSeries test_truth;   // C x (test steps)
};

/// Per-variable regression blocks combined entrywise with a sorted tree
/// reduction: the fitted weights are identical for any variable ordering.
struct EquivariantRidge {
    std::size_t dim = 0;
    std::vector<Matrix> grams;  // one d x d block per variable
    std::vector<Matrix> rhs;    // one d x 1 block per variable

    void add_variable(const Matrix& features, const Matrix& targets) {
        Matrix g(features.cols(), features.cols());
        Matrix r(features.cols(), 1);
        for (std::size_t n = 0; n < features.rows(); ++n) {
            const auto f = features.row(n);
            for (std::size_t i = 0; i < features.cols(); ++i) {
                for (std::size_t j = 0; j < features.cols(); ++j) g(i, j) += f[i] * f[j];
                r(i, 0) += f[i] * targets(n, 0);
            }
        }
        dim = features.cols();
        grams.push_back(std::move(g));
        rhs.push_back(std::move(r));
    }

    Matrix solve(double lambda) const {
        Matrix gram(dim, dim), r(dim, 1);
        std::vector<double> buf(grams.size());
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = 0; j < dim; ++j) {
                for (std::size_t c = 0; c < grams.size(); ++c) buf[c] = grams[c](i, j);
                std::sort(buf.begin(), buf.end());
                gram(i, j) = vi2d::detail::tree_reduce(buf);
            }
            for (std::size_t c = 0; c < rhs.size(); ++c) buf[c] = rhs[c](i, 0);
            std::sort(buf.begin(), buf.end());
            r(i, 0) = vi2d::detail::tree_reduce(buf);
        }
        for (std::size_t i = 0; i < dim; ++i) gram(i, i) += lambda;
        return cholesky_solve(gram, r);
    }
};

/// One-step-ahead forecast with a frozen scan and a variable-shared ridge
/// readout on [h_h, h_v, x, 1] features. Fitting and evaluation use
/// order-insensitive reductions, so the whole pipeline commutes with
/// variable permutations.
inline PipelineResult run_forecast_pipeline(Engine engine, const DiscreteSystem& dsys,
                                            const Readout& readout, const Matrix& w_v,
                                            const AggregatorSpec& agg,
                                            const MultivariateSeries& x,
                                            const StudyConfig& cfg) {
    const std::size_t num_vars = x.rows();
    const std::size_t num_steps = x.cols();
    const std::size_t t_train = static_cast<std::size_t>(
        std::floor(cfg.train_fraction * static_cast<double>(num_steps)));
    if (t_train < 2 || t_train >= num_steps)
        throw std::invalid_argument("run_forecast_pipeline: degenerate train/test split");

    ScanOptions opts;
    opts.schedule = (engine == Engine::vi) ? cfg.vi_schedule : Schedule::serial_ascending;
    opts.record_states = true;
    const ScanState init = zero_state(num_vars, dsys.d_h, dsys.d_v);
    const ScanOutput scan = (engine == Engine::vi)
                                ? vi_forward(dsys, readout, w_v, agg, x, init, opts)
                                : ordered_forward(dsys, readout, x, init, /*record_states=*/true);

    const std::size_t dim = dsys.d_h + dsys.d_v + 2;
    auto feature_row = [&](std::size_t c, std::size_t t, std::span<double> f) {
        const auto hh = scan.h_h_steps[t].row(c);
        const auto hv = scan.h_v_steps[t].row(c);
        std::size_t k = 0;
        for (double v : hh) f[k++] = v;
        for (double v : hv) f[k++] = v;
        f[k++] = x(c, t);
        f[k] = 1.0;
    };

    EquivariantRidge ridge;
    Matrix fc(t_train - 1, dim), yc(t_train - 1, 1);
    for (std::size_t c = 0; c < num_vars; ++c) {
        for (std::size_t t = 0; t + 1 < t_train; ++t) {
            feature_row(c, t, fc.row(t));
            yc(t, 0) = x(c, t + 1);
        }
        ridge.add_variable(fc, yc);
    }
    const Matrix weights = ridge.solve(cfg.ridge_lambda);

    const std::size_t t_test = num_steps - t_train;
    PipelineResult result;
    result.predictions = MultivariateSeries(num_vars, t_test);
    result.test_truth = MultivariateSeries(num_vars, t_test);
    MultivariateSeries persistence(num_vars, t_test);
    std::vector<double> f(dim);
    for (std::size_t c = 0; c < num_vars; ++c) {
        for (std::size_t k = 0; k < t_test; ++k) {
            const std::size_t t = t_train - 1 + k;  // predict x[., t + 1]
            feature_row(c, t, f);
            result.predictions(c, k) = dot(f, std::span<const double>(weights.data(), dim));
            result.test_truth(c, k) = x(c, t + 1);
            persistence(c, k) = x(c, t);
        }
    }
    result.model = metrics(result.predictions, result.test_truth);
    result.persistence = metrics(persistence, result.test_truth);
    return result;
}

// ---------------------------------------------------------------------------
// Studies.
// ---------------------------------------------------------------------------

struct TrialRow {
    std::string engine;
    std::size_t trial = 0;
    std::size_t num_vars = 0;
    double seconds = 0.0;  // wall clock, excluded from determinism guarantees
    Metrics metrics;
};

struct EngineAggregate {
    std::string engine;
    std::size_t trials = 0;
    Metrics mean;
    Metrics stddev;
};

struct StudyReport {
    std::string study;
    std::vector<TrialRow> rows;
    std::vector<EngineAggregate> aggregates;
};

namespace detail {

/// Welford accumulator; identical inputs give exactly zero variance.
struct Welford {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d1 = x - mean;
        mean += d1 / static_cast<double>(n);
        m2 += d1 * (x - mean);
    }

    double stddev() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
};

struct MetricsWelford {
    Welford mae, mape, mse;

    void add(const Metrics& m) {
        mae.add(m.mae);
        mape.add(m.mape);
        mse.add(m.mse);
    }
};

inline void append_aggregate(StudyReport& report, const std::string& engine,
                             const MetricsWelford& w) {
    EngineAggregate agg;
    agg.engine = engine;
    agg.trials = w.mae.n;
    agg.mean = {w.mae.mean, w.mape.mean, w.mse.mean};
    agg.stddev = {w.mae.stddev(), w.mape.stddev(), w.mse.stddev()};
    report.aggregates.push_back(agg);
}

inline MultivariateSeries permute_rows(const MultivariateSeries& x,
                                       const std::vector<std::size_t>& pi) {
    MultivariateSeries out(x.rows(), x.cols());
    for (std::size_t c = 0; c < x.rows(); ++c) {
        const auto src = x.row(pi[c]);
        std::copy(src.begin(), src.end(), out.row(c).begin());
    }
    return out;
}

}  // namespace detail

/// Repeats the forecast pipeline over random variable permutations of one
/// generated data set and reports per-engine metric spread. The globally
/// coupled engine is exactly permutation equivariant, so its spread is zero.
inline StudyReport run_permutation_study(const StudyConfig& cfg, std::size_t trials, Rng& rng) {
    if (trials < 2) throw std::invalid_argument("run_permutation_study: need at least two trials");

    Rng data_rng = rng.child(1);
    Rng sys_rng = rng.child(2);
    const Graph graph = watts_strogatz(cfg.num_vars, cfg.ws_degree, cfg.ws_rewire, data_rng);
    const MultivariateSeries series =
        var1_generate(graph, cfg.num_steps, cfg.noise_sigma, data_rng, cfg.burn_in);
    const ContinuousSystem sys = sample_system(cfg.d_h, cfg.d_v, cfg.d_psi, sys_rng);
    const DiscreteSystem dsys = discretize_zoh(sys, cfg.delta);
    const Readout readout{sys.c_h, sys.c_v};
    const AggregatorSpec agg = sample_aggregator(cfg.aggregator, cfg.d_psi, sys_rng);

    StudyReport report;
    report.study = "permutation";
    detail::MetricsWelford vi_agg, ordered_agg, persistence_agg;

    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng trial_rng = rng.child(100 + trial);
        const auto pi = trial_rng.permutation(cfg.num_vars);
        const MultivariateSeries permuted = detail::permute_rows(series, pi);

        for (const Engine engine : {Engine::vi, Engine::ordered}) {
            const auto start = std::chrono::steady_clock::now();
            const PipelineResult r =
                run_forecast_pipeline(engine, dsys, readout, sys.w_v, agg, permuted, cfg);
            const auto stop = std::chrono::steady_clock::now();
            TrialRow row;
            row.engine = engine_name(engine);
            row.trial = trial;
            row.num_vars = cfg.num_vars;
            row.seconds = std::chrono::duration<double>(stop - start).count();
            row.metrics = r.model;
            report.rows.push_back(row);
            if (engine == Engine::vi) {
                vi_agg.add(r.model);
                persistence_agg.add(r.persistence);
            } else {
                ordered_agg.add(r.model);
            }
        }
    }

    detail::append_aggregate(report, "vi", vi_agg);
    detail::append_aggregate(report, "ordered", ordered_agg);
    detail::append_aggregate(report, "persistence", persistence_agg);
    return report;
}

/// Regenerates the task at each variable count and times both engines'
/// forward pass over the training split, alongside forecast quality. Timed
/// repeats are interleaved across variable counts and engines so that slow
/// phases of the host hit every configuration alike; the reported seconds
/// are medians of bench_repeats samples after one warm-up each.
inline StudyReport run_cscaling_study(const std::vector<std::size_t>& c_values,
                                      const StudyConfig& cfg, Rng& rng) {
    if (c_values.empty()) throw std::invalid_argument("run_cscaling_study: no variable counts");
    for (std::size_t c : c_values)
        if (c != 16 && c != 32 && c != 64 && c != 128 && c != 256)
            throw std::invalid_argument(
                "run_cscaling_study: variable counts must come from {16, 32, 64, 128, 256}");

    StudyReport report;
    report.study = "cscaling";

    struct Task {
        StudyConfig local;
        MultivariateSeries series;
        MultivariateSeries train;
        ContinuousSystem sys;
        DiscreteSystem dsys;
        AggregatorSpec agg;
        ScanState init;
    };
    std::vector<Task> tasks;
    tasks.reserve(c_values.size());

    for (std::size_t idx = 0; idx < c_values.size(); ++idx) {
        Task task;
        task.local = cfg;
        task.local.num_vars = c_values[idx];

        Rng data_rng = rng.child(10 + idx);
        Rng sys_rng = rng.child(2);
        const Graph graph =
            watts_strogatz(task.local.num_vars, task.local.ws_degree, task.local.ws_rewire,
                           data_rng);
        task.series = var1_generate(graph, task.local.num_steps, task.local.noise_sigma, data_rng,
                                    task.local.burn_in);
        task.sys = sample_system(task.local.d_h, task.local.d_v, task.local.d_psi, sys_rng);
        task.dsys = discretize_zoh(task.sys, task.local.delta);
        task.agg = sample_aggregator(task.local.aggregator, task.local.d_psi, sys_rng);

        const std::size_t t_train = static_cast<std::size_t>(
            std::floor(task.local.train_fraction * static_cast<double>(task.local.num_steps)));
        task.train = MultivariateSeries(task.local.num_vars, t_train);
        for (std::size_t c = 0; c < task.local.num_vars; ++c)
            for (std::size_t t = 0; t < t_train; ++t) task.train(c, t) = task.series(c, t);
        task.init = zero_state(task.local.num_vars, task.local.d_h, task.local.d_v);
        tasks.push_back(std::move(task));
    }

    auto run_once = [](const Task& task, Engine engine) {
        ScanOptions opts;
        opts.schedule =
            (engine == Engine::vi) ? task.local.vi_schedule : Schedule::serial_ascending;
        const Readout readout{task.sys.c_h, task.sys.c_v};
        volatile double sink =
            (engine == Engine::vi)
                ? vi_forward(task.dsys, readout, task.sys.w_v, task.agg, task.train, task.init,
                             opts)
                      .y(0, 0)
                : ordered_forward(task.dsys, readout, task.train, task.init).y(0, 0);
        (void)sink;
    };

    const std::size_t repeats = std::max<std::size_t>(1, cfg.bench_repeats);
    std::vector<std::array<std::vector<double>, 2>> samples(tasks.size());
    for (std::size_t idx = 0; idx < tasks.size(); ++idx)
        for (const Engine engine : {Engine::vi, Engine::ordered})
            run_once(tasks[idx], engine);  // warm-up pass, discarded
    for (std::size_t rep = 0; rep < repeats; ++rep) {
        for (std::size_t idx = 0; idx < tasks.size(); ++idx) {
            for (const Engine engine : {Engine::vi, Engine::ordered}) {
                const auto start = std::chrono::steady_clock::now();
                run_once(tasks[idx], engine);
                const auto stop = std::chrono::steady_clock::now();
                samples[idx][engine == Engine::vi ? 0 : 1].push_back(
                    std::chrono::duration<double>(stop - start).count());
            }
        }
    }

    detail::MetricsWelford vi_agg, ordered_agg;
    for (std::size_t idx = 0; idx < tasks.size(); ++idx) {
        const Task& task = tasks[idx];
        const Readout readout{task.sys.c_h, task.sys.c_v};
        for (const Engine engine : {Engine::vi, Engine::ordered}) {
            const PipelineResult r = run_forecast_pipeline(engine, task.dsys, readout,
                                                           task.sys.w_v, task.agg, task.series,
                                                           task.local);
            auto& timing = samples[idx][engine == Engine::vi ? 0 : 1];
            std::sort(timing.begin(), timing.end());
            TrialRow row;
            row.engine = engine_name(engine);
            row.trial = idx;
            row.num_vars = task.local.num_vars;
            row.seconds = timing[timing.size() / 2];
            row.metrics = r.model;
            report.rows.push_back(row);
            if (engine == Engine::vi) vi_agg.add(r.model);
            else ordered_agg.add(r.model);
        }
    }
    detail::append_aggregate(report, "vi", vi_agg);
    detail::append_aggregate(report, "ordered", ordered_agg);
    return report;
}

}  // namespace vi2d::sim

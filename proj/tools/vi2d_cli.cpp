// Command-line front end: invariant suites, scaling benchmarks, controlled
// simulations, and CSV forecasting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vi2d/branches.hpp"
#include "vi2d/checks.hpp"
#include "vi2d/forecast.hpp"
#include "vi2d/report.hpp"
#include "vi2d/vi2d.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // suite or acceptance failure
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string token =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!token.empty()) out.push_back(token);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<std::size_t> parse_var_list(const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& token : split_list(text)) {
        std::size_t pos = 0;
        const unsigned long v = std::stoul(token, &pos);
        if (pos != token.size()) throw CLI::ValidationError("--vars", "not an integer: " + token);
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

vi2d::AggregatorKind parse_aggregator(const std::string& name) {
    if (name == "mean") return vi2d::AggregatorKind::mean;
    if (name == "sum") return vi2d::AggregatorKind::sum;
    if (name == "attention") return vi2d::AggregatorKind::attention;
    throw CLI::ValidationError("--agg", "expected mean, sum, or attention");
}

struct CommonFlags {
    std::uint64_t seed = 42;
    std::string out_dir = ".";
    std::string vars;
    std::size_t seq = 0;  // 0 = per-command default
    std::size_t trials = 10;
    std::string agg = "mean";
    double delta_long = 1.0;
    double delta_short = 0.01;
    double delta_freq = 0.005;
};

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw vi2d::io::IoError("cannot create output directory '" + dir + "'");
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

// ---------------------------------------------------------------------------

int run_check(const CommonFlags& common, const std::string& suites, bool break_coupling) {
    vi2d::checks::Options opts;
    opts.seed = common.seed;
    opts.coupling_fault = break_coupling ? 1e-3 : 0.0;
    const auto filter = split_list(suites);
    const auto results = vi2d::checks::run_all_suites(opts, filter);
    if (results.empty()) {
        std::cerr << "no suite matches '" << suites << "'\n";
        return kExitUsage;
    }

    bool all_passed = true;
    for (const auto& suite : results) {
        if (suite.passed()) {
            std::printf("suite %-16s PASS   (%zu checks)\n", suite.name.c_str(), suite.checks);
        } else {
            all_passed = false;
            std::printf("suite %-16s FAIL   (%zu of %zu checks failed)\n", suite.name.c_str(),
                        suite.failures, suite.checks);
            std::printf("  first counterexample: %s\n", suite.first_counterexample.c_str());
        }
    }
    return all_passed ? kExitOk : kExitFailure;
}

int run_bench(const CommonFlags& common, std::size_t repeats) {
    std::vector<std::size_t> c_values =
        common.vars.empty() ? std::vector<std::size_t>{16, 32, 64, 128, 256}
                            : parse_var_list(common.vars);
    const std::size_t seq = common.seq ? common.seq : 256;

    vi2d::sim::StudyConfig cfg;
    cfg.num_steps = seq;
    cfg.aggregator = parse_aggregator(common.agg);
    cfg.vi_schedule = vi2d::Schedule::parallel;
    cfg.d_h = cfg.d_v = cfg.d_psi = 1;
    cfg.bench_repeats = repeats;

    ensure_out_dir(common.out_dir);
    vi2d::Rng rng(common.seed);

    vi2d::BenchmarkConfig bench_cfg;
    bench_cfg.d_h = cfg.d_h;
    bench_cfg.d_v = cfg.d_v;
    bench_cfg.d_psi = cfg.d_psi;
    bench_cfg.delta = cfg.delta;
    const auto depth_rows = vi2d::depth_benchmark(c_values, seq, repeats, rng, bench_cfg);
    const auto study = vi2d::sim::run_cscaling_study(c_values, cfg, rng);

    auto study_metrics = [&](const std::string& engine, std::size_t c) -> const vi2d::sim::Metrics& {
        for (const auto& row : study.rows)
            if (row.engine == engine && row.num_vars == c) return row.metrics;
        throw std::logic_error("bench: missing study row");
    };

    std::string csv = "engine,C,median_seconds,mae,mape\n";
    std::printf("%-8s %6s %16s %12s %12s\n", "engine", "C", "median_seconds", "mae", "mape");
    for (const auto& row : depth_rows) {
        const auto& m = study_metrics(row.engine, row.num_vars);
        csv += row.engine + ',' + std::to_string(row.num_vars) + ',' +
               vi2d::io::format_double(row.seconds) + ',' + vi2d::io::format_double(m.mae) + ',' +
               vi2d::io::format_double(m.mape) + '\n';
        std::printf("%-8s %6zu %16.6f %12.6f %12.6f\n", row.engine.c_str(), row.num_vars,
                    row.seconds, m.mae, m.mape);
    }
    const std::string path = join_path(common.out_dir, "bench.csv");
    vi2d::io::write_file(path, csv);
    std::printf("wrote %s\n", path.c_str());
    return kExitOk;
}

void print_aggregates(const vi2d::sim::StudyReport& report) {
    std::printf("%s study aggregates:\n", report.study.c_str());
    for (const auto& agg : report.aggregates) {
        std::printf("  %-12s trials=%zu  MAE %.6f (%.6f)  MAPE %.6f (%.6f)  MSE %.6f (%.6f)\n",
                    agg.engine.c_str(), agg.trials, agg.mean.mae, agg.stddev.mae, agg.mean.mape,
                    agg.stddev.mape, agg.mean.mse, agg.stddev.mse);
    }
}

int run_simulate(const CommonFlags& common, const std::string& study) {
    if (study != "permutation" && study != "cscaling" && study != "both")
        throw CLI::ValidationError("--study", "expected permutation, cscaling, or both");
    if (common.trials < 2) throw CLI::ValidationError("--trials", "need at least two trials");

    ensure_out_dir(common.out_dir);

    if (study == "permutation" || study == "both") {
        vi2d::sim::StudyConfig cfg;
        cfg.aggregator = parse_aggregator(common.agg);
        if (!common.vars.empty()) {
            const auto vars = parse_var_list(common.vars);
            cfg.num_vars = vars.front();
        }
        cfg.num_steps = common.seq ? common.seq : 1000;
        vi2d::Rng rng(common.seed);
        const auto report = vi2d::sim::run_permutation_study(cfg, common.trials, rng);
        vi2d::io::write_file(join_path(common.out_dir, "permutation.csv"),
                             vi2d::sim::study_csv(report));
        vi2d::io::write_file(join_path(common.out_dir, "permutation.json"),
                             vi2d::sim::study_json(report));
        print_aggregates(report);
    }
    if (study == "cscaling" || study == "both") {
        vi2d::sim::StudyConfig cfg;
        cfg.aggregator = parse_aggregator(common.agg);
        cfg.num_steps = common.seq ? common.seq : 256;
        cfg.d_h = cfg.d_v = cfg.d_psi = 1;
        cfg.vi_schedule = vi2d::Schedule::parallel;
        const auto c_values = common.vars.empty()
                                  ? std::vector<std::size_t>{16, 32, 64, 128, 256}
                                  : parse_var_list(common.vars);
        vi2d::Rng rng(common.seed);
        const auto report = vi2d::sim::run_cscaling_study(c_values, cfg, rng);
        vi2d::io::write_file(join_path(common.out_dir, "cscaling.csv"),
                             vi2d::sim::study_csv(report));
        vi2d::io::write_file(join_path(common.out_dir, "cscaling.json"),
                             vi2d::sim::study_json(report));
        print_aggregates(report);
    }
    return kExitOk;
}

int run_forecast(const CommonFlags& common, const std::string& data_path, double lambda,
                 double train_fraction) {
    vi2d::ForecastConfig cfg;
    cfg.branches = {common.delta_long, common.delta_short, common.delta_freq};
    cfg.aggregator = parse_aggregator(common.agg);
    cfg.ridge_lambda = lambda;
    cfg.train_fraction = train_fraction;
    cfg.seed = common.seed;
    cfg.branches.validate();
    if (!(lambda >= 0.0)) throw CLI::ValidationError("--lambda", "must be non-negative");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw CLI::ValidationError("--train-fraction", "must lie in (0, 1)");

    const vi2d::io::CsvSeries input = vi2d::io::read_csv_series(data_path);
    ensure_out_dir(common.out_dir);
    const vi2d::ForecastResult result = vi2d::forecast_series(input.series, cfg);

    vi2d::io::write_csv_series(join_path(common.out_dir, "predictions.csv"), result.predictions,
                               input.names);
    nlohmann::json summary;
    summary["model"] = {{"mae", result.model.mae},
                        {"mape", result.model.mape},
                        {"mse", result.model.mse}};
    summary["persistence"] = {{"mae", result.persistence.mae},
                              {"mape", result.persistence.mape},
                              {"mse", result.persistence.mse}};
    summary["test_steps"] = result.predictions.cols();
    summary["train_steps"] = result.train_steps;
    summary["variables"] = result.predictions.rows();
    vi2d::io::write_file(join_path(common.out_dir, "forecast.json"), summary.dump(2) + "\n");

    std::printf("forecast    MAE %.6f  MAPE %.6f  MSE %.6f\n", result.model.mae,
                result.model.mape, result.model.mse);
    std::printf("persistence MAE %.6f  MAPE %.6f  MSE %.6f\n", result.persistence.mae,
                result.persistence.mape, result.persistence.mse);
    std::printf("wrote %s and forecast.json\n",
                join_path(common.out_dir, "predictions.csv").c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Permutation-equivariant 2D state-space toolkit"};
    app.require_subcommand(1);
    app.set_config("--config")->description("flat key = value file; flags take precedence");

    CommonFlags common;
    app.add_option("--seed", common.seed, "RNG seed")->capture_default_str();
    app.add_option("--out", common.out_dir, "output directory")->capture_default_str();
    app.add_option("--vars", common.vars, "comma-separated variable counts");
    app.add_option("--seq", common.seq, "sequence length (0 = command default)");
    app.add_option("--trials", common.trials, "trial count for simulations")
        ->capture_default_str();
    app.add_option("--agg", common.agg, "aggregator: mean, sum, or attention")
        ->capture_default_str();
    app.add_option("--delta-long", common.delta_long, "long-branch step size")
        ->capture_default_str();
    app.add_option("--delta-short", common.delta_short, "short-branch step size")
        ->capture_default_str();
    app.add_option("--delta-freq", common.delta_freq, "spectral-branch step size")
        ->capture_default_str();

    auto* check = app.add_subcommand("check", "run the invariant suites");
    check->fallthrough();
    std::string suites;
    bool break_coupling = false;
    check->add_option("--suites", suites, "comma-separated suite filter");
    check->add_flag("--break-coupling", break_coupling,
                    "fault-injection hook: perturb the coupling so suites must fail");

    auto* bench = app.add_subcommand("bench", "depth benchmark and C-scaling table");
    bench->fallthrough();
    std::size_t repeats = 5;
    bench->add_option("--repeats", repeats, "timed repeats per measurement")
        ->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "controlled VAR(1) studies");
    simulate->fallthrough();
    std::string study = "permutation";
    simulate->add_option("--study", study, "permutation, cscaling, or both")
        ->capture_default_str();

    auto* forecast = app.add_subcommand("forecast", "one-step-ahead forecast of a CSV series");
    forecast->fallthrough();
    std::string data_path;
    double lambda = 1e-3;
    double train_fraction = 0.8;
    forecast->add_option("--data", data_path, "input CSV (rows = steps, columns = variables)")
        ->required();
    forecast->add_option("--lambda", lambda, "ridge strength")->capture_default_str();
    forecast->add_option("--train-fraction", train_fraction, "training split fraction")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*check) return run_check(common, suites, break_coupling);
        if (*bench) return run_bench(common, repeats);
        if (*simulate) return run_simulate(common, study);
        if (*forecast) return run_forecast(common, data_path, lambda, train_fraction);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const vi2d::io::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

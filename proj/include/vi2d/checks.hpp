#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <sstream>
#include <utility>
#include <string>
#include <vector>

#include "vi2d/aggregation.hpp"
#include "vi2d/coupling.hpp"
#include "vi2d/matrix.hpp"
#include "vi2d/numerics.hpp"
#include "vi2d/rng.hpp"
#include "vi2d/scan.hpp"
#include "vi2d/ssm.hpp"

namespace vi2d::checks {

struct SuiteResult {
    std::string name;
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::string first_counterexample;

    bool passed() const { return failures == 0; }
};

struct Options {
    std::uint64_t seed = 42;
    /// Test hook: a nonzero value contaminates the coupling and equivariance
    /// suites with an index-sensitive perturbation, so a working suite must
    /// report a counterexample. Exists to prove the suites can fail.
    double coupling_fault = 0.0;
};

namespace detail {

class Recorder {
public:
    explicit Recorder(SuiteResult& result) : result_(result) {}

    void expect(bool ok, const std::string& context) {
        ++result_.checks;
        if (!ok) {
            ++result_.failures;
            if (result_.first_counterexample.empty()) result_.first_counterexample = context;
        }
    }

private:
    SuiteResult& result_;
};

inline AggregatorSpec random_attention(std::size_t dim, Rng& rng) {
    std::vector<double> query(dim);
    for (double& q : query) q = rng.uniform(-1.0, 1.0);
    Matrix key(dim, dim);
    for (std::size_t i = 0; i < key.size(); ++i) key.data()[i] = rng.uniform(-0.5, 0.5);
    return AggregatorSpec::attention_pool(std::move(query), std::move(key), 1.0);
}

inline std::string describe_coupling(const CanonicalCoupling& c) {
    std::ostringstream os;
    os << "alpha=" << c.alpha << " beta=" << c.beta << " C=" << c.num_vars;
    return os.str();
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double best = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            best = std::max(best, std::abs(a(r, c) - b(r, c)));
    return best;
}

}  // namespace detail

/// Canonical coupling algebra: commutation with every permutation is
/// equivalent to the shared-diagonal/shared-off-diagonal form, decomposition
/// inverts construction, and the mode eigenvalues match a dense eigensolver.
inline SuiteResult run_coupling_suite(const Options& opts) {
    SuiteResult result;
    result.name = "coupling";
    detail::Recorder rec(result);
    Rng rng(opts.seed);

    for (std::size_t c_count = 2; c_count <= 4; ++c_count) {
        for (int rep = 0; rep < 60; ++rep) {
            Matrix m(c_count, c_count);
            const int family = rep % 3;
            const CanonicalCoupling coupling{rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5),
                                             c_count};
            if (family == 0) {
                for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
            } else if (family == 1) {
                m = build_canonical(coupling);
            } else {
                m = build_canonical(coupling);
                m(0, c_count - 1) += rng.uniform(0.5, 1.0) * 1e-3;
            }
            const bool commutes = commutes_with_all_permutations(m);
            const bool accepted = std::holds_alternative<CanonicalCoupling>(decompose_to_canonical(m));
            std::ostringstream os;
            os << "C=" << c_count << " rep=" << rep << ": commutes=" << commutes
               << " decompose_accepts=" << accepted;
            rec.expect(commutes == accepted, os.str());
        }
    }

    // Dyadic draws keep alpha + beta exactly representable, so the round
    // trip must be bit-exact.
    auto dyadic = [&](double lo, double hi) {
        const double step = std::ldexp(1.0, -20);
        const auto cells = static_cast<std::uint64_t>((hi - lo) / step);
        return lo + step * static_cast<double>(rng.below(cells + 1));
    };
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t c_count = 2 + rng.below(4);
        const CanonicalCoupling coupling{dyadic(-1.0, 1.0), dyadic(-0.5, 0.5), c_count};
        Matrix m = build_canonical(coupling);
        if (opts.coupling_fault != 0.0 && c_count >= 2) m(0, 1) += opts.coupling_fault;
        const auto decomposed = decompose_to_canonical(m);
        bool round_trip = false;
        if (const auto* back = std::get_if<CanonicalCoupling>(&decomposed))
            round_trip = *back == coupling;
        rec.expect(round_trip, "round trip failed for " + detail::describe_coupling(coupling));
    }
    return result;
}

/// Mode spectrum against the dense eigensolver: eigenvalues of the canonical
/// matrix form the multiset {alpha x (C-1), alpha + C beta}.
inline SuiteResult run_mode_suite(const Options& opts) {
    SuiteResult result;
    result.name = "modes";
    detail::Recorder rec(result);
    Rng rng(opts.seed + 1);

    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t c_count = 2 + rng.below(4);  // up to 5
        const CanonicalCoupling coupling{rng.uniform(-1.2, 1.2), rng.uniform(-0.6, 0.6), c_count};
        const ModeSpectrum modes = mode_spectrum(coupling);
        auto eigs = eigenvalues(build_canonical(coupling));

        std::vector<double> expected(c_count - 1, modes.lambda_diff);
        expected.push_back(modes.lambda_mean);
        std::sort(expected.begin(), expected.end());
        std::vector<double> got;
        bool real_ok = true;
        for (const auto& lambda : eigs) {
            if (std::abs(lambda.imag()) > 1e-10) real_ok = false;
            got.push_back(lambda.real());
        }
        std::sort(got.begin(), got.end());
        double gap = 0.0;
        for (std::size_t i = 0; i < expected.size(); ++i)
            gap = std::max(gap, std::abs(expected[i] - got[i]));
        rec.expect(real_ok && gap < 1e-9,
                   "mode eigenvalues off by " + std::to_string(gap) + " for " +
                       detail::describe_coupling(coupling));

        double rho = 0.0;
        for (double v : got) rho = std::max(rho, std::abs(v));
        rec.expect(modes.stable == (rho < 1.0),
                   "stability flag mismatch for " + detail::describe_coupling(coupling));

        // Any vector orthogonal to the all-ones direction stays an
        // eigenvector with eigenvalue alpha.
        const Matrix m = build_canonical(coupling);
        for (std::size_t k = 0; k + 1 < c_count; ++k) {
            std::vector<double> basis(c_count, 0.0);
            basis[k] = 1.0;
            basis[k + 1] = -1.0;
            const auto mapped = mat_vec(m, basis);
            double residual = 0.0;
            for (std::size_t i = 0; i < c_count; ++i)
                residual = std::max(residual, std::abs(mapped[i] - coupling.alpha * basis[i]));
            rec.expect(residual < 1e-10, "zero-sum eigenvector residual " + std::to_string(residual));
        }
    }
    return result;
}

/// Discrete stability certificates: Hurwitz continuous blocks pass at every
/// step size, one planted eigenvalue with positive real part fails at all of
/// them.
inline SuiteResult run_stability_suite(const Options& opts) {
    SuiteResult result;
    result.name = "stability";
    detail::Recorder rec(result);
    Rng rng(opts.seed + 2);
    const std::vector<double> deltas{0.01, 0.1, 1.0, 10.0};

    for (int rep = 0; rep < 25; ++rep) {
        ContinuousSystem sys = sample_system(4, 4, 4, rng);
        for (const auto& row : certify_stability(sys, deltas)) {
            std::ostringstream os;
            os << "rep=" << rep << " delta=" << row.delta << " rho_h=" << row.rho_h
               << " rho_v=" << row.rho_v;
            rec.expect(row.pass, os.str());
        }

        sys.a_v(0, 0) = 0.1;  // one unstable vertical mode
        bool any_pass = false;
        for (const auto& row : certify_stability(sys, deltas)) any_pass |= row.pass;
        rec.expect(!any_pass, "planted positive mode not rejected at rep=" + std::to_string(rep));
    }
    return result;
}

/// Discretization sanity: the semigroup law in the step size and the
/// first-order limit at vanishing delta.
inline SuiteResult run_zoh_suite(const Options& opts) {
    SuiteResult result;
    result.name = "zoh";
    detail::Recorder rec(result);
    Rng rng(opts.seed + 3);

    for (int rep = 0; rep < 20; ++rep) {
        const ContinuousSystem sys = sample_system(3, 3, 2, rng);
        const double d1 = rng.uniform(0.05, 0.5);
        const double d2 = rng.uniform(0.05, 0.5);
        const Matrix lhs = discretize_zoh(sys, d1 + d2).a_bar;
        const Matrix rhs = discretize_zoh(sys, d1).a_bar * discretize_zoh(sys, d2).a_bar;
        rec.expect(detail::max_abs_diff(lhs, rhs) < 1e-8,
                   "semigroup deviation " + std::to_string(detail::max_abs_diff(lhs, rhs)));

        const DiscreteSystem tiny = discretize_zoh(sys, 1e-6);
        const Matrix a_dev = tiny.a_bar - Matrix::identity(sys.d_h + sys.d_v);
        rec.expect(a_dev.max_abs() < 1e-4, "A_bar does not approach identity at small delta");
        const Matrix b_scaled = tiny.b_bar * 1e6 - sys.joint_input();
        rec.expect(b_scaled.max_abs() < 1e-4, "B_bar/delta does not approach the input block");

        const Matrix corner = tiny.a_bar.block(0, sys.d_h, sys.d_h, sys.d_v);
        rec.expect(corner.max_abs() == 0.0, "exponential broke block triangularity");
    }
    return result;
}

/// Pooling invariance on explicit S_3 orderings plus the softmax weight
/// identities.
inline SuiteResult run_aggregation_suite(const Options& opts) {
    SuiteResult result;
    result.name = "aggregation";
    detail::Recorder rec(result);
    Rng rng(opts.seed + 4);
    const std::size_t dim = 4;

    std::vector<AggregatorSpec> specs{AggregatorSpec::mean_pool(), AggregatorSpec::sum_pool(),
                                      detail::random_attention(dim, rng)};

    const std::size_t orders[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int rep = 0; rep < 40; ++rep) {
        Matrix items(3, dim);
        for (std::size_t i = 0; i < items.size(); ++i) items.data()[i] = rng.uniform(-2.0, 2.0);
        for (const auto& spec : specs) {
            const auto base = pool(spec, items);
            for (const auto& order : orders) {
                Matrix shuffled(3, dim);
                for (std::size_t r = 0; r < 3; ++r)
                    for (std::size_t c = 0; c < dim; ++c) shuffled(r, c) = items(order[r], c);
                const auto permuted = pool(spec, shuffled);
                rec.expect(permuted == base, "pool output changed under reordering");
            }
        }

        const auto total = pool(AggregatorSpec::sum_pool(), items);
        const auto average = pool(AggregatorSpec::mean_pool(), items);
        bool mean_matches = true;
        for (std::size_t j = 0; j < dim; ++j)
            if (average[j] != total[j] * (1.0 / 3.0)) mean_matches = false;
        rec.expect(mean_matches, "mean pool is not sum/C at rep=" + std::to_string(rep));

        const auto weights = attention_weights(specs[2], items);
        double sum_w = 0.0;
        bool nonneg = true;
        for (double w : weights) {
            sum_w += w;
            nonneg &= (w >= 0.0);
        }
        rec.expect(nonneg && std::abs(sum_w - 1.0) < 1e-12, "attention weights not a probability vector");
    }
    return result;
}

/// Forward-scan symmetry: the globally coupled engine commutes with variable
/// permutations bit for bit; the ordered baseline shows measurable
/// order sensitivity on generic instances; per-variable updates decouple
/// once the pooled field is removed, while the ordered chain stays coupled.
inline SuiteResult run_equivariance_suite(const Options& opts) {
    SuiteResult result;
    result.name = "equivariance";
    detail::Recorder rec(result);
    Rng rng(opts.seed + 5);

    for (int rep = 0; rep < 12; ++rep) {
        const std::size_t num_vars = 2 + rng.below(5);
        const std::size_t t_len = 24;
        const ContinuousSystem sys = sample_system(3, 3, 3, rng);
        const DiscreteSystem dsys = discretize_zoh(sys, 0.4);
        const Readout readout{sys.c_h, sys.c_v};
        MultivariateSeries x(num_vars, t_len);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
        const ScanState init = zero_state(num_vars, sys.d_h, sys.d_v);
        const auto pi = rng.permutation(num_vars);

        MultivariateSeries xp(num_vars, t_len);
        for (std::size_t c = 0; c < num_vars; ++c) {
            for (std::size_t t = 0; t < t_len; ++t) xp(c, t) = x(pi[c], t);
            if (opts.coupling_fault != 0.0)
                for (std::size_t t = 0; t < t_len; ++t)
                    xp(c, t) += opts.coupling_fault * static_cast<double>(c + 1);
        }

        for (int kind = 0; kind < 3; ++kind) {
            AggregatorSpec agg = AggregatorSpec::mean_pool();
            if (kind == 1) agg = AggregatorSpec::sum_pool();
            if (kind == 2) agg = detail::random_attention(sys.d_psi, rng);
            const auto base = vi_forward(dsys, readout, sys.w_v, agg, x, init);
            const auto perm = vi_forward(dsys, readout, sys.w_v, agg, xp, init);
            bool exact = true;
            for (std::size_t c = 0; c < num_vars && exact; ++c)
                for (std::size_t t = 0; t < t_len; ++t)
                    if (perm.y(c, t) != base.y(pi[c], t)) {
                        exact = false;
                        break;
                    }
            std::ostringstream os;
            os << "vi engine not equivariant (rep=" << rep << " kind=" << kind << ")";
            rec.expect(exact, os.str());
        }

        if (num_vars >= 2) {
            bool identity = true;
            for (std::size_t c = 0; c < num_vars; ++c) identity &= (pi[c] == c);
            if (!identity && opts.coupling_fault == 0.0) {
                const auto base = ordered_forward(dsys, readout, x, init);
                const auto perm = ordered_forward(dsys, readout, xp, init);
                double dev = 0.0;
                for (std::size_t c = 0; c < num_vars; ++c)
                    for (std::size_t t = 0; t < t_len; ++t)
                        dev = std::max(dev, std::abs(perm.y(c, t) - base.y(pi[c], t)));
                rec.expect(dev > 1e-3, "ordered baseline is unexpectedly order insensitive");
            }
        }
    }

    // Structural dependency check: with the pooled couplings zeroed the
    // globally coupled engine updates variables independently, whereas the
    // ordered chain still feeds earlier variables into later ones.
    {
        Rng local(opts.seed + 6);
        ContinuousSystem sys = sample_system(3, 3, 3, local);
        sys.a_hpsi = Matrix(sys.d_h, sys.d_psi);
        sys.a_vpsi = Matrix(sys.d_v, sys.d_psi);
        const DiscreteSystem dsys = discretize_zoh(sys, 0.4);
        const Readout readout{sys.c_h, sys.c_v};
        const std::size_t num_vars = 5, t_len = 16;
        MultivariateSeries x(num_vars, t_len);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = local.uniform(-1.0, 1.0);
        MultivariateSeries bumped = x;
        bumped(0, 3) += 1.0;
        const ScanState init = zero_state(num_vars, sys.d_h, sys.d_v);

        const auto vi_a = vi_forward(dsys, readout, sys.w_v, AggregatorSpec::mean_pool(), x, init);
        const auto vi_b =
            vi_forward(dsys, readout, sys.w_v, AggregatorSpec::mean_pool(), bumped, init);
        bool others_untouched = true;
        for (std::size_t c = 1; c < num_vars; ++c)
            for (std::size_t t = 0; t < t_len; ++t)
                if (vi_a.y(c, t) != vi_b.y(c, t)) others_untouched = false;
        rec.expect(others_untouched,
                   "decoupled engine leaked a perturbation across variables");

        const auto ord_a = ordered_forward(dsys, readout, x, init);
        const auto ord_b = ordered_forward(dsys, readout, bumped, init);
        double chain_dev = 0.0;
        for (std::size_t c = 1; c < num_vars; ++c)
            for (std::size_t t = 0; t < t_len; ++t)
                chain_dev = std::max(chain_dev, std::abs(ord_a.y(c, t) - ord_b.y(c, t)));
        rec.expect(chain_dev > 0.0, "ordered chain shows no cross-variable dependency");
    }
    return result;
}

/// Linearity in inputs and initial state for the linear aggregators, and
/// schedule independence of the per-variable updates.
inline SuiteResult run_scan_property_suite(const Options& opts) {
    SuiteResult result;
    result.name = "scan-properties";
    detail::Recorder rec(result);
    Rng rng(opts.seed + 7);

    for (int rep = 0; rep < 15; ++rep) {
        const std::size_t num_vars = 2 + rng.below(4);
        const std::size_t t_len = 20;
        const ContinuousSystem sys = sample_system(3, 2, 3, rng);
        const DiscreteSystem dsys = discretize_zoh(sys, 0.3);
        const Readout readout{sys.c_h, sys.c_v};

        auto random_series = [&] {
            MultivariateSeries x(num_vars, t_len);
            for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
            return x;
        };
        auto random_state = [&] {
            ScanState s = zero_state(num_vars, sys.d_h, sys.d_v);
            for (std::size_t i = 0; i < s.h_h.size(); ++i) s.h_h.data()[i] = rng.uniform(-1.0, 1.0);
            for (std::size_t i = 0; i < s.h_v.size(); ++i) s.h_v.data()[i] = rng.uniform(-1.0, 1.0);
            return s;
        };

        const MultivariateSeries x1 = random_series(), x2 = random_series();
        const ScanState s1 = random_state(), s2 = random_state();
        const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);

        for (const auto& agg : {AggregatorSpec::mean_pool(), AggregatorSpec::sum_pool()}) {
            MultivariateSeries xm(num_vars, t_len);
            ScanState sm = zero_state(num_vars, sys.d_h, sys.d_v);
            for (std::size_t i = 0; i < xm.size(); ++i)
                xm.data()[i] = a * x1.data()[i] + b * x2.data()[i];
            for (std::size_t i = 0; i < sm.h_h.size(); ++i)
                sm.h_h.data()[i] = a * s1.h_h.data()[i] + b * s2.h_h.data()[i];
            for (std::size_t i = 0; i < sm.h_v.size(); ++i)
                sm.h_v.data()[i] = a * s1.h_v.data()[i] + b * s2.h_v.data()[i];

            const auto y1 = vi_forward(dsys, readout, sys.w_v, agg, x1, s1);
            const auto y2 = vi_forward(dsys, readout, sys.w_v, agg, x2, s2);
            const auto ym = vi_forward(dsys, readout, sys.w_v, agg, xm, sm);
            double dev = 0.0;
            for (std::size_t c = 0; c < num_vars; ++c)
                for (std::size_t t = 0; t < t_len; ++t)
                    dev = std::max(dev,
                                   std::abs(ym.y(c, t) - (a * y1.y(c, t) + b * y2.y(c, t))));
            rec.expect(dev < 1e-9, "scan is not linear: deviation " + std::to_string(dev));
        }

        ScanOptions asc, desc, par;
        desc.schedule = Schedule::serial_descending;
        par.schedule = Schedule::parallel;
        const auto agg = AggregatorSpec::mean_pool();
        const auto ya = vi_forward(dsys, readout, sys.w_v, agg, x1, s1, asc);
        const auto yd = vi_forward(dsys, readout, sys.w_v, agg, x1, s1, desc);
        const auto yp = vi_forward(dsys, readout, sys.w_v, agg, x1, s1, par);
        rec.expect(ya.y == yd.y && ya.y == yp.y, "schedules disagree bit for bit");
    }
    return result;
}

inline std::vector<SuiteResult> run_all_suites(const Options& opts,
                                               const std::vector<std::string>& filter = {}) {
    using Runner = SuiteResult (*)(const Options&);
    const std::pair<const char*, Runner> suites[] = {
        {"coupling", run_coupling_suite},       {"modes", run_mode_suite},
        {"stability", run_stability_suite},     {"zoh", run_zoh_suite},
        {"aggregation", run_aggregation_suite}, {"equivariance", run_equivariance_suite},
        {"scan-properties", run_scan_property_suite},
    };
    std::vector<SuiteResult> results;
    for (const auto& [name, runner] : suites) {
        if (!filter.empty() &&
            std::find(filter.begin(), filter.end(), name) == filter.end())
            continue;
        results.push_back(runner(opts));
    }
    return results;
}

}  // namespace vi2d::checks

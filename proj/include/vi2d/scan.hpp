#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "vi2d/aggregation.hpp"
#include "vi2d/matrix.hpp"
#include "vi2d/rng.hpp"
#include "vi2d/ssm.hpp"

namespace vi2d {

/// Paired per-variable hidden states at one time step (row c belongs to
/// variable c).
struct ScanState {
    Matrix h_h;  // C x d_h
    Matrix h_v;  // C x d_v
};

inline ScanState zero_state(std::size_t num_vars, std::size_t d_h, std::size_t d_v) {
    return {Matrix(num_vars, d_h), Matrix(num_vars, d_v)};
}

enum class Schedule { serial_ascending, serial_descending, parallel };

/// What feeds the pooled field: the previous step's [h_h, x] pair (default)
/// or the raw input alone.
enum class FeatureSource { state_and_input, input_only };

struct ScanOptions {
    /// 0: the vertical update reads the current-step horizontal state;
    /// 1: it reads the previous step's, which matches the joint kernel form.
    int vh_lag = 0;
    Schedule schedule = Schedule::serial_ascending;
    FeatureSource features = FeatureSource::state_and_input;
    std::size_t max_workers = 0;  // 0 = hardware concurrency
    bool record_states = false;   // keep per-step states (feature extraction)
};

struct ScanOutput {
    Matrix y;                                  // C x T
    ScanState final_state;
    std::vector<std::vector<double>> psi_trace;  // T entries of width d_psi
    std::vector<Matrix> h_h_steps;             // per step when recording is on
    std::vector<Matrix> h_v_steps;
};

namespace detail {

/// Fork-join pool with one condition-variable barrier per dispatch. The
/// caller thread works on the first chunk; chunk boundaries depend only on
/// the element count, and chunks write disjoint rows, so results do not
/// depend on the schedule.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t extra_workers) {
        threads_.reserve(extra_workers);
        for (std::size_t i = 0; i < extra_workers; ++i)
            threads_.emplace_back([this, slot = i + 1] { worker_loop(slot); });
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    ~WorkerPool() {
        {
            std::unique_lock lock(mu_);
            stop_ = true;
        }
        cv_start_.notify_all();
        for (auto& t : threads_) t.join();
    }

    std::size_t slots() const { return threads_.size() + 1; }

    /// fn(slot, begin, end) over the fixed partition of [0, n).
    void run(std::size_t n, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
        if (threads_.empty()) {
            fn(0, 0, n);
            return;
        }
        {
            std::unique_lock lock(mu_);
            fn_ = &fn;
            n_ = n;
            pending_ = threads_.size();
            ++generation_;
        }
        cv_start_.notify_all();
        run_chunk(fn, n, 0);
        std::unique_lock lock(mu_);
        cv_done_.wait(lock, [this] { return pending_ == 0; });
        fn_ = nullptr;
    }

    static std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t n, std::size_t slot,
                                                            std::size_t slots) {
        return {n * slot / slots, n * (slot + 1) / slots};
    }

private:
    void run_chunk(const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                   std::size_t n, std::size_t slot) const {
        const auto [begin, end] = chunk_bounds(n, slot, slots());
        if (begin < end) fn(slot, begin, end);
    }

    void worker_loop(std::size_t slot) {
        std::uint64_t seen = 0;
        while (true) {
            const std::function<void(std::size_t, std::size_t, std::size_t)>* fn = nullptr;
            std::size_t n = 0;
            {
                std::unique_lock lock(mu_);
                cv_start_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                fn = fn_;
                n = n_;
            }
            run_chunk(*fn, n, slot);
            {
                std::unique_lock lock(mu_);
                if (--pending_ == 0) cv_done_.notify_one();
            }
        }
    }

    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_start_;
    std::condition_variable cv_done_;
    const std::function<void(std::size_t, std::size_t, std::size_t)>* fn_ = nullptr;
    std::size_t n_ = 0;
    std::size_t pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

inline std::size_t worker_count(const ScanOptions& opts, std::size_t num_vars) {
    if (opts.schedule != Schedule::parallel) return 1;
    std::size_t hw = opts.max_workers ? opts.max_workers : std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return std::max<std::size_t>(1, std::min(hw, num_vars));
}

/// Runs fn(c) once per variable under the requested schedule. Every schedule
/// produces identical results because updates touch disjoint rows.
template <typename Fn>
void for_each_variable(Schedule schedule, WorkerPool* pool, std::size_t num_vars, Fn&& fn) {
    switch (schedule) {
        case Schedule::serial_ascending:
            for (std::size_t c = 0; c < num_vars; ++c) fn(c);
            return;
        case Schedule::serial_descending:
            for (std::size_t c = num_vars; c > 0; --c) fn(c - 1);
            return;
        case Schedule::parallel: {
            if (!pool) {
                for (std::size_t c = 0; c < num_vars; ++c) fn(c);
                return;
            }
            const std::function<void(std::size_t, std::size_t, std::size_t)> chunk =
                [&](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t c = begin; c < end; ++c) fn(c);
                };
            pool->run(num_vars, chunk);
            return;
        }
    }
}

inline void validate_scan_inputs(const MultivariateSeries& x, const ScanState& init,
                                 std::size_t d_h, std::size_t d_v) {
    if (x.rows() == 0 || x.cols() == 0)
        throw std::invalid_argument("scan: series must have at least one variable and one step");
    if (!x.all_finite()) throw std::domain_error("scan: non-finite input sample");
    if (init.h_h.rows() != x.rows() || init.h_h.cols() != d_h || init.h_v.rows() != x.rows() ||
        init.h_v.cols() != d_v)
        throw std::invalid_argument("scan: initial state shape mismatch");
    if (!init.h_h.all_finite() || !init.h_v.all_finite())
        throw std::domain_error("scan: non-finite initial state");
}

/// proj.row(c) = W_v [h_row, x] (or W_v [x] for input-only features).
inline void project_feature(const Matrix& w_v, FeatureSource features,
                            std::span<const double> h_row, double x, std::span<double> out) {
    const std::size_t d_state = (features == FeatureSource::state_and_input) ? h_row.size() : 0;
    for (std::size_t r = 0; r < w_v.rows(); ++r) {
        const auto wrow = w_v.row(r);
        double s = 0.0;
        for (std::size_t j = 0; j < d_state; ++j) s += wrow[j] * h_row[j];
        s += wrow[d_state] * x;
        out[r] = s;
    }
}

inline void check_feature_width(const Matrix& w_v, FeatureSource features, std::size_t d_h) {
    const std::size_t want = (features == FeatureSource::state_and_input) ? d_h + 1 : 1;
    if (w_v.cols() != want)
        throw std::invalid_argument("scan: W_v width " + std::to_string(w_v.cols()) +
                                    " does not match feature layout width " + std::to_string(want));
}

}  // namespace detail

/// Forward pass with global coupling: one pooled descriptor per step, then
/// independent per-variable updates. The pooled field for step t is built
/// from the previous step's features; the first step pools the initial state
/// with a zero input placeholder.
inline ScanOutput vi_forward(const DiscreteSystem& dsys, const Readout& readout, const Matrix& w_v,
                             const AggregatorSpec& agg, const MultivariateSeries& x,
                             const ScanState& init, const ScanOptions& opts = {}) {
    const std::size_t num_vars = x.rows();
    const std::size_t num_steps = x.cols();
    const std::size_t d_h = dsys.d_h;
    const std::size_t d_v = dsys.d_v;
    detail::validate_scan_inputs(x, init, d_h, d_v);
    detail::check_feature_width(w_v, opts.features, d_h);
    if (readout.c_h.cols() != d_h || readout.c_v.cols() != d_v)
        throw std::invalid_argument("scan: readout shape mismatch");

    const Matrix a_h_bar = dsys.a_h_bar();
    const Matrix a_v_bar = dsys.a_v_bar();
    const Matrix a_vh_bar = dsys.a_vh_bar();
    const Matrix b_psi_h = dsys.b_psi_h();
    const Matrix b_psi_v = dsys.b_psi_v();
    const Matrix b_x_h = dsys.b_x_h();
    const Matrix b_x_v = dsys.b_x_v();

    ScanOutput out;
    out.y = Matrix(num_vars, num_steps);
    out.psi_trace.reserve(num_steps);

    Matrix hh_prev = init.h_h, hh_next(num_vars, d_h);
    Matrix hv_prev = init.h_v, hv_next(num_vars, d_v);
    Matrix proj(num_vars, dsys.d_psi);

    const std::size_t workers = detail::worker_count(opts, num_vars);
    std::unique_ptr<detail::WorkerPool> wpool;
    if (opts.schedule == Schedule::parallel && workers > 1)
        wpool = std::make_unique<detail::WorkerPool>(workers - 1);

    for (std::size_t c = 0; c < num_vars; ++c)
        detail::project_feature(w_v, opts.features, hh_prev.row(c), 0.0, proj.row(c));

    // Raw views of the tiny parameter blocks; the per-variable loop is the
    // hot path of the whole library.
    const double* ah = a_h_bar.data();
    const double* av = a_v_bar.data();
    const double* avh = a_vh_bar.data();
    const double* bxh = b_x_h.data();
    const double* bxv = b_x_v.data();
    const double* ch = readout.c_h.data();
    const double* cv = readout.c_v.data();
    const double* wv = w_v.data();
    const std::size_t d_z = w_v.cols();
    const std::size_t d_psi = dsys.d_psi;
    const bool state_features = (opts.features == FeatureSource::state_and_input);
    const int vh_lag = opts.vh_lag;

    std::vector<double> psi_inject(d_h + d_v);
    for (std::size_t t = 0; t < num_steps; ++t) {
        const std::vector<double> psi = pool(agg, proj);
        // The pooled-field injection is shared by every variable.
        for (std::size_t i = 0; i < d_h; ++i) psi_inject[i] = dot(b_psi_h.row(i), psi);
        for (std::size_t i = 0; i < d_v; ++i) psi_inject[d_h + i] = dot(b_psi_v.row(i), psi);
        const double* x_data = x.data();
        double* y_data = out.y.data();
        const double* hh_prev_data = hh_prev.data();
        const double* hv_prev_data = hv_prev.data();
        double* hh_next_data = hh_next.data();
        double* hv_next_data = hv_next.data();
        double* proj_data = proj.data();
        const auto step = [&](std::size_t c) {
            const double xv = x_data[c * num_steps + t];
            const double* hh_p = hh_prev_data + c * d_h;
            const double* hv_p = hv_prev_data + c * d_v;
            double* hh_n = hh_next_data + c * d_h;
            double* hv_n = hv_next_data + c * d_v;
            for (std::size_t i = 0; i < d_h; ++i) {
                const double* arow = ah + i * d_h;
                double acc = 0.0;
                for (std::size_t j = 0; j < d_h; ++j) acc += arow[j] * hh_p[j];
                hh_n[i] = acc + psi_inject[i] + bxh[i] * xv;
            }
            const double* hh_used = (vh_lag == 0) ? hh_n : hh_p;
            for (std::size_t i = 0; i < d_v; ++i) {
                const double* arow = av + i * d_v;
                double acc = 0.0;
                for (std::size_t j = 0; j < d_v; ++j) acc += arow[j] * hv_p[j];
                const double* crow = avh + i * d_h;
                double cross = 0.0;
                for (std::size_t j = 0; j < d_h; ++j) cross += crow[j] * hh_used[j];
                hv_n[i] = acc + cross + psi_inject[d_h + i] + bxv[i] * xv;
            }
            double yv = 0.0;
            for (std::size_t i = 0; i < d_h; ++i) yv += ch[i] * hh_n[i];
            for (std::size_t i = 0; i < d_v; ++i) yv += cv[i] * hv_n[i];
            y_data[c * num_steps + t] = yv;
            double* prow = proj_data + c * d_psi;
            const std::size_t d_state = state_features ? d_h : 0;
            for (std::size_t r = 0; r < d_psi; ++r) {
                const double* wrow = wv + r * d_z;
                double s = 0.0;
                for (std::size_t j = 0; j < d_state; ++j) s += wrow[j] * hh_n[j];
                prow[r] = s + wrow[d_state] * xv;
            }
        };
        detail::for_each_variable(opts.schedule, wpool.get(), num_vars, step);
        out.psi_trace.push_back(psi);
        if (opts.record_states) {
            out.h_h_steps.push_back(hh_next);
            out.h_v_steps.push_back(hv_next);
        }
        std::swap(hh_prev, hh_next);
        std::swap(hv_prev, hv_next);
    }

    out.final_state = {std::move(hh_prev), std::move(hv_prev)};
    return out;
}

inline ScanOutput vi_forward(const ContinuousSystem& sys, double delta, const AggregatorSpec& agg,
                             const MultivariateSeries& x, const ScanState& init,
                             const ScanOptions& opts = {}) {
    const DiscreteSystem dsys = discretize_zoh(sys, delta);
    return vi_forward(dsys, Readout{sys.c_h, sys.c_v}, sys.w_v, agg, x, init, opts);
}

/// Conventional 2D baseline: a temporal recurrence per variable plus a
/// strictly ascending chain along the variable axis at every step. The chain
/// restarts from zero at each step; init.h_v is not consumed. The chain is
/// executed serially on purpose: its dependency depth is the quantity the
/// depth benchmark measures.
inline ScanOutput ordered_forward(const DiscreteSystem& dsys, const Readout& readout,
                                  const MultivariateSeries& x, const ScanState& init,
                                  bool record_states = false) {
    const std::size_t num_vars = x.rows();
    const std::size_t num_steps = x.cols();
    const std::size_t d_h = dsys.d_h;
    const std::size_t d_v = dsys.d_v;
    detail::validate_scan_inputs(x, init, d_h, d_v);
    if (readout.c_h.cols() != d_h || readout.c_v.cols() != d_v)
        throw std::invalid_argument("scan: readout shape mismatch");

    const Matrix a_h_bar = dsys.a_h_bar();
    const Matrix a_v_bar = dsys.a_v_bar();
    const Matrix b_x_h = dsys.b_x_h();
    const Matrix b_x_v = dsys.b_x_v();

    ScanOutput out;
    out.y = Matrix(num_vars, num_steps);

    Matrix hh_prev = init.h_h, hh_next(num_vars, d_h);
    Matrix hv(num_vars, d_v);
    std::vector<double> chain(d_v), chain_next(d_v);

    for (std::size_t t = 0; t < num_steps; ++t) {
        std::fill(chain.begin(), chain.end(), 0.0);
        for (std::size_t c = 0; c < num_vars; ++c) {
            const double xv = x(c, t);
            const auto hh_p = hh_prev.row(c);
            auto hh_n = hh_next.row(c);
            for (std::size_t i = 0; i < d_h; ++i)
                hh_n[i] = dot(a_h_bar.row(i), hh_p) + b_x_h(i, 0) * xv;
            for (std::size_t i = 0; i < d_v; ++i)
                chain_next[i] = dot(a_v_bar.row(i), chain) + b_x_v(i, 0) * xv;
            std::swap(chain, chain_next);
            auto hv_row = hv.row(c);
            std::copy(chain.begin(), chain.end(), hv_row.begin());
            out.y(c, t) = dot(readout.c_h.row(0), hh_n) + dot(readout.c_v.row(0), chain);
        }
        if (record_states) {
            out.h_h_steps.push_back(hh_next);
            out.h_v_steps.push_back(hv);
        }
        std::swap(hh_prev, hh_next);
    }

    out.final_state = {std::move(hh_prev), std::move(hv)};
    return out;
}

// ---------------------------------------------------------------------------
// Data-dependent (selective) parameters.
// ---------------------------------------------------------------------------

/// Affine maps that condition the discrete parameters on the input. The
/// input/readout maps act pointwise per variable and step; the step-size map
/// acts per step on the variable mean, so it is permutation invariant.
struct SelectiveParams {
    std::size_t d_h = 0;
    std::size_t d_v = 0;
    std::vector<double> w_b, bias_b;  // x -> input column, width d_h + d_v
    std::vector<double> w_c, bias_c;  // x -> readout row, width d_h + d_v
    double w_delta = 0.0;
    double bias_delta = 0.0;
    double delta_floor = 1e-3;
};

struct SelectiveStreams {
    std::size_t num_vars = 0;
    std::size_t num_steps = 0;
    std::size_t d_h = 0;
    std::size_t d_v = 0;
    std::vector<double> delta;      // per step, >= delta_floor
    std::vector<Matrix> b;          // per step: C x (d_h + d_v)
    std::vector<Matrix> c_read;     // per step: C x (d_h + d_v)
};

namespace detail {

inline double softplus(double z) {
    if (z > 30.0) return z;
    if (z < -30.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

/// Order-insensitive mean of one step's samples across variables.
inline double variable_mean(const MultivariateSeries& x, std::size_t t) {
    std::vector<double> column(x.rows());
    for (std::size_t c = 0; c < x.rows(); ++c) column[c] = x(c, t);
    std::sort(column.begin(), column.end());
    return tree_reduce(column) / static_cast<double>(column.size());
}

}  // namespace detail

inline SelectiveStreams make_selective(const SelectiveParams& params, const MultivariateSeries& x) {
    if (!(params.delta_floor > 0.0))
        throw std::domain_error("make_selective: delta_floor must be positive");
    const std::size_t width = params.d_h + params.d_v;
    if (params.w_b.size() != width || params.bias_b.size() != width ||
        params.w_c.size() != width || params.bias_c.size() != width)
        throw std::invalid_argument("make_selective: affine map width mismatch");
    if (!x.all_finite()) throw std::domain_error("make_selective: non-finite input");

    SelectiveStreams s;
    s.num_vars = x.rows();
    s.num_steps = x.cols();
    s.d_h = params.d_h;
    s.d_v = params.d_v;
    s.delta.reserve(s.num_steps);
    s.b.reserve(s.num_steps);
    s.c_read.reserve(s.num_steps);
    for (std::size_t t = 0; t < s.num_steps; ++t) {
        const double mean = detail::variable_mean(x, t);
        s.delta.push_back(params.delta_floor +
                          detail::softplus(params.w_delta * mean + params.bias_delta));
        Matrix bt(s.num_vars, width), ct(s.num_vars, width);
        for (std::size_t c = 0; c < s.num_vars; ++c) {
            const double xv = x(c, t);
            for (std::size_t j = 0; j < width; ++j) {
                bt(c, j) = params.w_b[j] * xv + params.bias_b[j];
                ct(c, j) = params.w_c[j] * xv + params.bias_c[j];
            }
        }
        s.b.push_back(std::move(bt));
        s.c_read.push_back(std::move(ct));
    }
    return s;
}

/// Continuous template with diagonal state blocks, the only shape the
/// per-step re-discretization supports.
struct DiagonalSystemTemplate {
    std::vector<double> a_h;  // diagonal entries
    std::vector<double> a_v;
    Matrix a_vh;    // d_v x d_h
    Matrix a_hpsi;  // d_h x d_psi
    Matrix a_vpsi;  // d_v x d_psi
    Matrix w_v;     // d_psi x d_z

    std::size_t d_h() const { return a_h.size(); }
    std::size_t d_v() const { return a_v.size(); }
    std::size_t d_psi() const { return a_hpsi.cols(); }
};

namespace detail {

/// (e^x - e^y) / (x - y), evaluated stably near x == y.
inline double exp_divided_difference(double x, double y) {
    const double d = 0.5 * (x - y);
    const double m = 0.5 * (x + y);
    double sinch;
    if (std::abs(d) < 1e-5) {
        const double d2 = d * d;
        sinch = 1.0 + d2 / 6.0 + d2 * d2 / 120.0;
    } else {
        sinch = std::sinh(d) / d;
    }
    return std::exp(m) * sinch;
}

/// g(z) = (e^z - 1) / z, the first phi function.
inline double phi1(double z) {
    if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
    return std::expm1(z) / z;
}

/// (g(x) - g(y)) / (x - y) for g = phi1, evaluated stably near x == y.
inline double phi1_divided_difference(double x, double y) {
    const double d = x - y;
    if (std::abs(d) < 1e-5) {
        const double z = 0.5 * (x + y);
        if (std::abs(z) < 1e-4) return 0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0;
        return (std::exp(z) * (z - 1.0) + 1.0) / (z * z);
    }
    return (phi1(x) - phi1(y)) / d;
}

}  // namespace detail

/// Selective scan: per step the diagonal state blocks are re-discretized at
/// that step's delta with elementwise exponentials (the cross block and the
/// input integral use closed-form divided differences), and the input and
/// readout vectors come from the data-dependent streams.
inline ScanOutput vi_forward_selective(const DiagonalSystemTemplate& tpl,
                                       const SelectiveStreams& streams, const AggregatorSpec& agg,
                                       const MultivariateSeries& x, const ScanState& init,
                                       const ScanOptions& opts = {}) {
    const std::size_t num_vars = x.rows();
    const std::size_t num_steps = x.cols();
    const std::size_t d_h = tpl.d_h();
    const std::size_t d_v = tpl.d_v();
    const std::size_t d_psi = tpl.d_psi();
    detail::validate_scan_inputs(x, init, d_h, d_v);
    detail::check_feature_width(tpl.w_v, opts.features, d_h);
    if (streams.num_vars != num_vars || streams.num_steps != num_steps ||
        streams.d_h != d_h || streams.d_v != d_v)
        throw std::invalid_argument("vi_forward_selective: stream shape mismatch");

    ScanOutput out;
    out.y = Matrix(num_vars, num_steps);
    out.psi_trace.reserve(num_steps);

    Matrix hh_prev = init.h_h, hh_next(num_vars, d_h);
    Matrix hv_prev = init.h_v, hv_next(num_vars, d_v);
    Matrix proj(num_vars, d_psi);
    for (std::size_t c = 0; c < num_vars; ++c)
        detail::project_feature(tpl.w_v, opts.features, hh_prev.row(c), 0.0, proj.row(c));

    std::vector<double> eh(d_h), ev(d_v), ph(d_h), pv(d_v);
    Matrix a_vh_bar(d_v, d_h), phi_vh(d_v, d_h);
    Matrix b_psi_h(d_h, d_psi), b_psi_v(d_v, d_psi);

    const std::size_t workers = detail::worker_count(opts, num_vars);
    std::unique_ptr<detail::WorkerPool> wpool;
    if (opts.schedule == Schedule::parallel && workers > 1)
        wpool = std::make_unique<detail::WorkerPool>(workers - 1);

    for (std::size_t t = 0; t < num_steps; ++t) {
        const double delta = streams.delta[t];
        for (std::size_t i = 0; i < d_h; ++i) {
            eh[i] = std::exp(delta * tpl.a_h[i]);
            ph[i] = delta * detail::phi1(delta * tpl.a_h[i]);
        }
        for (std::size_t i = 0; i < d_v; ++i) {
            ev[i] = std::exp(delta * tpl.a_v[i]);
            pv[i] = delta * detail::phi1(delta * tpl.a_v[i]);
        }
        for (std::size_t i = 0; i < d_v; ++i) {
            for (std::size_t j = 0; j < d_h; ++j) {
                const double zv = delta * tpl.a_v[i];
                const double zh = delta * tpl.a_h[j];
                a_vh_bar(i, j) = tpl.a_vh(i, j) * delta * detail::exp_divided_difference(zv, zh);
                phi_vh(i, j) =
                    tpl.a_vh(i, j) * delta * delta * detail::phi1_divided_difference(zv, zh);
            }
        }
        // Discretized psi couplings: Phi11 A_hpsi and Phi21 A_hpsi + Phi22 A_vpsi.
        for (std::size_t i = 0; i < d_h; ++i)
            for (std::size_t j = 0; j < d_psi; ++j) b_psi_h(i, j) = ph[i] * tpl.a_hpsi(i, j);
        for (std::size_t i = 0; i < d_v; ++i)
            for (std::size_t j = 0; j < d_psi; ++j) {
                double s = pv[i] * tpl.a_vpsi(i, j);
                for (std::size_t k = 0; k < d_h; ++k) s += phi_vh(i, k) * tpl.a_hpsi(k, j);
                b_psi_v(i, j) = s;
            }

        const std::vector<double> psi = pool(agg, proj);
        const Matrix& bt = streams.b[t];
        const Matrix& ct = streams.c_read[t];
        const auto step = [&](std::size_t c) {
            const double xv = x(c, t);
            const auto hh_p = hh_prev.row(c);
            const auto hv_p = hv_prev.row(c);
            auto hh_n = hh_next.row(c);
            auto hv_n = hv_next.row(c);
            const auto b_row = bt.row(c);
            for (std::size_t i = 0; i < d_h; ++i)
                hh_n[i] = eh[i] * hh_p[i] + dot(b_psi_h.row(i), psi) + ph[i] * b_row[i] * xv;
            const auto hh_used = (opts.vh_lag == 0) ? std::span<const double>(hh_n) : hh_p;
            for (std::size_t i = 0; i < d_v; ++i) {
                double bx = pv[i] * b_row[d_h + i];
                for (std::size_t k = 0; k < d_h; ++k) bx += phi_vh(i, k) * b_row[k];
                hv_n[i] = ev[i] * hv_p[i] + dot(a_vh_bar.row(i), hh_used) +
                          dot(b_psi_v.row(i), psi) + bx * xv;
            }
            const auto c_row = ct.row(c);
            double yv = 0.0;
            for (std::size_t i = 0; i < d_h; ++i) yv += c_row[i] * hh_n[i];
            for (std::size_t i = 0; i < d_v; ++i) yv += c_row[d_h + i] * hv_n[i];
            out.y(c, t) = yv;
            detail::project_feature(tpl.w_v, opts.features, hh_n, xv, proj.row(c));
        };
        detail::for_each_variable(opts.schedule, wpool.get(), num_vars, step);
        out.psi_trace.push_back(psi);
        if (opts.record_states) {
            out.h_h_steps.push_back(hh_next);
            out.h_v_steps.push_back(hv_next);
        }
        std::swap(hh_prev, hh_next);
        std::swap(hv_prev, hv_next);
    }

    out.final_state = {std::move(hh_prev), std::move(hv_prev)};
    return out;
}

// ---------------------------------------------------------------------------
// Depth benchmark.
// ---------------------------------------------------------------------------

struct BenchmarkRow {
    std::string engine;
    std::size_t num_vars = 0;
    double seconds = 0.0;
};

struct BenchmarkConfig {
    std::size_t d_h = 1;
    std::size_t d_v = 1;
    std::size_t d_psi = 1;
    double delta = 0.1;
};

/// Median wall-clock of one forward pass per engine and variable count. The
/// global-coupling engine runs its per-variable updates on the worker pool;
/// the ordered engine walks its variable chain serially, so its time grows
/// with the chain length.
inline std::vector<BenchmarkRow> depth_benchmark(const std::vector<std::size_t>& c_values,
                                                 std::size_t t_len, std::size_t repeats, Rng& rng,
                                                 const BenchmarkConfig& cfg = {}) {
    if (c_values.empty()) throw std::invalid_argument("depth_benchmark: no variable counts");
    if (repeats == 0) throw std::invalid_argument("depth_benchmark: repeats must be >= 1");
    using clock = std::chrono::steady_clock;

    std::vector<BenchmarkRow> rows;
    const AggregatorSpec agg = AggregatorSpec::mean_pool();
    for (std::size_t ci = 0; ci < c_values.size(); ++ci) {
        const std::size_t num_vars = c_values[ci];
        Rng local = rng.child(ci);
        const ContinuousSystem sys = sample_system(cfg.d_h, cfg.d_v, cfg.d_psi, local);
        const DiscreteSystem dsys = discretize_zoh(sys, cfg.delta);
        const Readout readout{sys.c_h, sys.c_v};
        MultivariateSeries x(num_vars, t_len);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = local.uniform(-1.0, 1.0);
        const ScanState init = zero_state(num_vars, cfg.d_h, cfg.d_v);

        ScanOptions vi_opts;
        vi_opts.schedule = Schedule::parallel;

        auto time_median = [&](auto&& run) {
            run();  // warm-up pass, discarded
            std::vector<double> samples;
            samples.reserve(repeats);
            for (std::size_t r = 0; r < repeats; ++r) {
                const auto start = clock::now();
                run();
                const auto stop = clock::now();
                samples.push_back(std::chrono::duration<double>(stop - start).count());
            }
            std::sort(samples.begin(), samples.end());
            return samples[samples.size() / 2];
        };

        rows.push_back({"vi", num_vars, time_median([&] {
                            volatile double sink =
                                vi_forward(dsys, readout, sys.w_v, agg, x, init, vi_opts).y(0, 0);
                            (void)sink;
                        })});
        rows.push_back({"ordered", num_vars, time_median([&] {
                            volatile double sink = ordered_forward(dsys, readout, x, init).y(0, 0);
                            (void)sink;
                        })});
    }
    return rows;
}

}  // namespace vi2d

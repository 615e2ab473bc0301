#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "vi2d/io.hpp"
#include "vi2d/matrix.hpp"
#include "vi2d/numerics.hpp"
#include "vi2d/scan.hpp"
#include "vi2d/ssm.hpp"

namespace vi2d {

/// Step sizes of the three pathways. The spectral step is kept small because
/// the scan along the frequency axis over-attenuates high bins when sampled
/// coarsely.
struct BranchConfig {
    double delta_long = 1.0;
    double delta_short = 0.01;
    double delta_freq = 0.005;

    void validate() const {
        if (!(delta_short > 0.0) || !(delta_long > 0.0) || !(delta_freq > 0.0))
            throw std::domain_error("BranchConfig: step sizes must be positive");
        if (!(delta_short < delta_long))
            throw std::domain_error("BranchConfig: delta_short must be below delta_long");
        if (delta_freq < 0.001 || delta_freq > 0.01)
            throw std::domain_error("BranchConfig: delta_freq must lie in [0.001, 0.01]");
    }
};

enum class BranchKind { long_term, short_term, spectral };

/// Per-variable frequency repacking: the non-redundant spectrum with the
/// structurally zero imaginary parts (DC, and Nyquist for even T) dropped,
/// laid out as [real 0..T/2, imag 1..T/2-1]. Width equals the input width.
inline MultivariateSeries spectral_transform(const MultivariateSeries& x) {
    const std::size_t t_len = x.cols();
    if (t_len < 4) throw std::invalid_argument("spectral_transform: need at least four steps");
    if (t_len % 2 != 0)
        throw std::invalid_argument(
            "spectral_transform: step count must be even; pad the series by one sample");
    MultivariateSeries out(x.rows(), t_len);
    const std::size_t bins = t_len / 2 + 1;
    for (std::size_t c = 0; c < x.rows(); ++c) {
        const ComplexSpectrum s = rdft(x.row(c));
        auto row = out.row(c);
        for (std::size_t k = 0; k < bins; ++k) row[k] = s.real[k];
        for (std::size_t k = 1; k + 1 < bins; ++k) row[bins + k - 1] = s.imag[k];
    }
    return out;
}

/// Inverse of the repacking for one variable row; used to verify that the
/// layout loses nothing.
inline std::vector<double> spectral_unpack(std::span<const double> row) {
    const std::size_t t_len = row.size();
    if (t_len < 4 || t_len % 2 != 0)
        throw std::invalid_argument("spectral_unpack: width must be even and at least four");
    ComplexSpectrum s;
    s.length = t_len / 2 + 1;
    s.real.assign(s.length, 0.0);
    s.imag.assign(s.length, 0.0);
    for (std::size_t k = 0; k < s.length; ++k) s.real[k] = row[k];
    for (std::size_t k = 1; k + 1 < s.length; ++k) s.imag[k] = row[s.length + k - 1];
    return irdft(s, t_len);
}

/// Discretizes the shared template at the branch's step size and scans. The
/// spectral branch scans the repacked spectrum along the frequency axis,
/// low bins first.
inline Matrix run_branch(BranchKind kind, const ContinuousSystem& sys, const BranchConfig& cfg,
                         const AggregatorSpec& agg, const MultivariateSeries& x,
                         const ScanOptions& opts = {}) {
    cfg.validate();
    double delta = 0.0;
    switch (kind) {
        case BranchKind::long_term: delta = cfg.delta_long; break;
        case BranchKind::short_term: delta = cfg.delta_short; break;
        case BranchKind::spectral: delta = cfg.delta_freq; break;
    }
    MultivariateSeries repacked;
    const MultivariateSeries* input = &x;
    if (kind == BranchKind::spectral) {
        repacked = spectral_transform(x);
        input = &repacked;
    }
    const ScanState init = zero_state(input->rows(), sys.d_h, sys.d_v);
    return vi_forward(sys, delta, agg, *input, init, opts).y;
}

struct BranchOutputs {
    Matrix h_long;
    Matrix h_short;
    Matrix h_spec;
};

/// All three pathways from one shared template, the default configuration.
inline BranchOutputs run_branches(const ContinuousSystem& sys, const BranchConfig& cfg,
                                  const AggregatorSpec& agg, const MultivariateSeries& x,
                                  const ScanOptions& opts = {}) {
    return {run_branch(BranchKind::long_term, sys, cfg, agg, x, opts),
            run_branch(BranchKind::short_term, sys, cfg, agg, x, opts),
            run_branch(BranchKind::spectral, sys, cfg, agg, x, opts)};
}

/// Independent parameters per pathway, for configurations that decouple the
/// branches instead of sharing one template.
struct BranchSystems {
    ContinuousSystem long_term;
    ContinuousSystem short_term;
    ContinuousSystem spectral;
};

inline BranchOutputs run_branches(const BranchSystems& systems, const BranchConfig& cfg,
                                  const AggregatorSpec& agg, const MultivariateSeries& x,
                                  const ScanOptions& opts = {}) {
    return {run_branch(BranchKind::long_term, systems.long_term, cfg, agg, x, opts),
            run_branch(BranchKind::short_term, systems.short_term, cfg, agg, x, opts),
            run_branch(BranchKind::spectral, systems.spectral, cfg, agg, x, opts)};
}

/// Position-wise gate: three scalar scores, each affine in the three branch
/// features at that position, softmaxed into mixing weights.
struct GateParams {
    Matrix score_weights{ {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0} };  // 3 x 3
    std::vector<double> score_bias{0.0, 0.0, 0.0};

    void validate() const {
        if (score_weights.rows() != 3 || score_weights.cols() != 3 || score_bias.size() != 3)
            throw std::invalid_argument("GateParams: expected 3x3 weights and 3 biases");
    }
};

/// Softmax mixing weights at one position.
inline std::array<double, 3> fuse_weights(const GateParams& gate, double v_long, double v_short,
                                          double v_spec) {
    const double f[3] = {v_long, v_short, v_spec};
    double scores[3];
    for (int b = 0; b < 3; ++b) {
        scores[b] = gate.score_bias[b];
        for (int j = 0; j < 3; ++j) scores[b] += gate.score_weights(b, j) * f[j];
    }
    const double shift = std::max({scores[0], scores[1], scores[2]});
    double e[3];
    double denom = 0.0;
    for (int b = 0; b < 3; ++b) {
        e[b] = std::exp(scores[b] - shift);
        denom += e[b];
    }
    return {e[0] / denom, e[1] / denom, e[2] / denom};
}

/// Convex combination of the three branches under the gate weights. The
/// anchored form output = spec + w_l (long - spec) + w_s (short - spec)
/// reproduces identical branches exactly.
inline Matrix fuse(const GateParams& gate, const Matrix& h_long, const Matrix& h_short,
                   const Matrix& h_spec) {
    gate.validate();
    if (h_long.rows() != h_short.rows() || h_long.cols() != h_short.cols() ||
        h_long.rows() != h_spec.rows() || h_long.cols() != h_spec.cols())
        throw std::invalid_argument("fuse: branch outputs must share one shape");
    Matrix out(h_long.rows(), h_long.cols());
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            const double vl = h_long(r, c);
            const double vs = h_short(r, c);
            const double vf = h_spec(r, c);
            const auto w = fuse_weights(gate, vl, vs, vf);
            out(r, c) = vf + w[0] * (vl - vf) + w[1] * (vs - vf);
        }
    }
    return out;
}

inline io::KeyValueDoc to_key_values(const BranchConfig& cfg) {
    io::KeyValueDoc doc;
    doc.set_double("delta_long", cfg.delta_long);
    doc.set_double("delta_short", cfg.delta_short);
    doc.set_double("delta_freq", cfg.delta_freq);
    return doc;
}

inline BranchConfig branch_config_from_key_values(const io::KeyValueDoc& doc) {
    BranchConfig cfg;
    cfg.delta_long = doc.get_double("delta_long");
    cfg.delta_short = doc.get_double("delta_short");
    cfg.delta_freq = doc.get_double("delta_freq");
    cfg.validate();
    return cfg;
}

inline io::KeyValueDoc to_key_values(const GateParams& gate) {
    io::KeyValueDoc doc;
    doc.set_matrix("gate_weights", gate.score_weights);
    doc.set_values("gate_bias", gate.score_bias);
    return doc;
}

inline GateParams gate_from_key_values(const io::KeyValueDoc& doc) {
    GateParams gate;
    gate.score_weights = doc.get_matrix("gate_weights", 3, 3);
    gate.score_bias = doc.get_values("gate_bias");
    gate.validate();
    return gate;
}

}  // namespace vi2d

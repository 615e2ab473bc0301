#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "vi2d/io.hpp"
#include "vi2d/matrix.hpp"
#include "vi2d/numerics.hpp"
#include "vi2d/rng.hpp"

namespace vi2d {

/// Continuous-time block system. The joint state [h_h; h_v] evolves under
///
///   d/dt [h_h; h_v] = [[A_h, 0], [A_vh, A_v]] [h_h; h_v]
///                     + [[A_hpsi, B_h], [A_vpsi, B_v]] [psi; x]
///
/// with readout y = C_h h_h + C_v h_v. All blocks are shared across
/// variables. W_v projects per-variable features into the pooled field.
struct ContinuousSystem {
    std::size_t d_h = 0;
    std::size_t d_v = 0;
    std::size_t d_psi = 0;

    Matrix a_h;      // d_h x d_h
    Matrix a_v;      // d_v x d_v
    Matrix a_vh;     // d_v x d_h
    Matrix a_hpsi;   // d_h x d_psi
    Matrix a_vpsi;   // d_v x d_psi
    Matrix b_h;      // d_h x 1
    Matrix b_v;      // d_v x 1
    Matrix c_h;      // 1 x d_h
    Matrix c_v;      // 1 x d_v
    Matrix w_v;      // d_psi x d_z

    std::size_t d_z() const { return w_v.cols(); }

    void validate() const {
        auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
            if (m.rows() != r || m.cols() != c)
                throw std::invalid_argument(std::string("ContinuousSystem: block ") + name +
                                            " has wrong shape");
        };
        expect(a_h, d_h, d_h, "A_h");
        expect(a_v, d_v, d_v, "A_v");
        expect(a_vh, d_v, d_h, "A_vh");
        expect(a_hpsi, d_h, d_psi, "A_hpsi");
        expect(a_vpsi, d_v, d_psi, "A_vpsi");
        expect(b_h, d_h, 1, "B_h");
        expect(b_v, d_v, 1, "B_v");
        expect(c_h, 1, d_h, "C_h");
        expect(c_v, 1, d_v, "C_v");
        if (w_v.rows() != d_psi)
            throw std::invalid_argument("ContinuousSystem: W_v row count must equal d_psi");
        for (const Matrix* m : {&a_h, &a_v, &a_vh, &a_hpsi, &a_vpsi, &b_h, &b_v, &c_h, &c_v, &w_v})
            if (!m->all_finite())
                throw std::domain_error("ContinuousSystem: non-finite entry");
    }

    /// Joint drift matrix [[A_h, 0], [A_vh, A_v]].
    Matrix joint_drift() const {
        Matrix a(d_h + d_v, d_h + d_v);
        a.set_block(0, 0, a_h);
        a.set_block(d_h, 0, a_vh);
        a.set_block(d_h, d_h, a_v);
        return a;
    }

    /// Joint input matrix [[A_hpsi, B_h], [A_vpsi, B_v]] acting on [psi; x].
    Matrix joint_input() const {
        Matrix b(d_h + d_v, d_psi + 1);
        b.set_block(0, 0, a_hpsi);
        b.set_block(0, d_psi, b_h);
        b.set_block(d_h, 0, a_vpsi);
        b.set_block(d_h, d_psi, b_v);
        return b;
    }
};

/// Zero-order-hold discretization of a ContinuousSystem at step `delta`:
/// A_bar = exp(A delta), B_bar = (integral of exp(A tau) over [0, delta]) B.
/// The block partition of the continuous system is carried along so scan
/// engines can slice the discrete blocks back out.
struct DiscreteSystem {
    double delta = 0.0;
    std::size_t d_h = 0;
    std::size_t d_v = 0;
    std::size_t d_psi = 0;
    Matrix a_bar;  // (d_h + d_v) square, block lower triangular
    Matrix b_bar;  // (d_h + d_v) x (d_psi + 1)

    Matrix a_h_bar() const { return a_bar.block(0, 0, d_h, d_h); }
    Matrix a_vh_bar() const { return a_bar.block(d_h, 0, d_v, d_h); }
    Matrix a_v_bar() const { return a_bar.block(d_h, d_h, d_v, d_v); }
    Matrix b_psi_h() const { return b_bar.block(0, 0, d_h, d_psi); }
    Matrix b_psi_v() const { return b_bar.block(d_h, 0, d_v, d_psi); }
    Matrix b_x_h() const { return b_bar.block(0, d_psi, d_h, 1); }
    Matrix b_x_v() const { return b_bar.block(d_h, d_psi, d_v, 1); }
};

/// Output maps applied to the joint state, y = C_h h_h + C_v h_v.
struct Readout {
    Matrix c_h;  // 1 x d_h
    Matrix c_v;  // 1 x d_v
};

inline DiscreteSystem discretize_zoh(const ContinuousSystem& sys, double delta) {
    if (!(delta > 0.0)) throw std::domain_error("discretize_zoh: delta must be positive");
    sys.validate();
    const std::size_t n = sys.d_h + sys.d_v;
    const std::size_t m = sys.d_psi + 1;

    // exp([[A, B], [0, 0]] * delta) = [[A_bar, B_bar], [0, I]]; the augmented
    // exponential also handles singular or nilpotent A without special cases.
    Matrix aug(n + m, n + m);
    aug.set_block(0, 0, sys.joint_drift() * delta);
    aug.set_block(0, n, sys.joint_input() * delta);
    const Matrix e = mat_exp(aug);

    DiscreteSystem d;
    d.delta = delta;
    d.d_h = sys.d_h;
    d.d_v = sys.d_v;
    d.d_psi = sys.d_psi;
    d.a_bar = e.block(0, 0, n, n);
    d.b_bar = e.block(0, n, n, m);
    return d;
}

/// One row of a stability certificate: spectral radii of the discretized
/// state blocks at a given step size.
struct StabilityRow {
    double delta = 0.0;
    double rho_h = 0.0;
    double rho_v = 0.0;
    bool pass = false;
};

/// Verifies that the discretized state blocks are contractions at each step
/// size. Holds for every delta > 0 whenever A_h and A_v are Hurwitz.
inline std::vector<StabilityRow> certify_stability(const ContinuousSystem& sys,
                                                   const std::vector<double>& deltas) {
    sys.validate();
    std::vector<StabilityRow> rows;
    rows.reserve(deltas.size());
    for (double delta : deltas) {
        if (!(delta > 0.0)) throw std::domain_error("certify_stability: delta must be positive");
        StabilityRow row;
        row.delta = delta;
        row.rho_h = spectral_radius(mat_exp(sys.a_h * delta));
        row.rho_v = spectral_radius(mat_exp(sys.a_v * delta));
        row.pass = row.rho_h < 1.0 && row.rho_v < 1.0;
        rows.push_back(row);
    }
    return rows;
}

/// Impulse-response kernels of the discrete joint recurrence:
/// K_psi[k] = C A_bar^k B_psi and K_x[k] = C A_bar^k B_x, where C = [C_h, C_v].
struct ConvolutionKernels {
    std::size_t length = 0;
    std::vector<std::vector<double>> k_psi;  // length entries, d_psi wide
    std::vector<double> k_x;                 // length entries
};

inline ConvolutionKernels convolution_kernels(const DiscreteSystem& dsys, const Readout& readout,
                                              std::size_t length) {
    if (length == 0) throw std::invalid_argument("convolution_kernels: length must be >= 1");
    const std::size_t n = dsys.d_h + dsys.d_v;
    if (readout.c_h.rows() != 1 || readout.c_h.cols() != dsys.d_h || readout.c_v.rows() != 1 ||
        readout.c_v.cols() != dsys.d_v)
        throw std::invalid_argument("convolution_kernels: readout shape mismatch");

    Matrix v(1, n);
    v.set_block(0, 0, readout.c_h);
    v.set_block(0, dsys.d_h, readout.c_v);

    ConvolutionKernels k;
    k.length = length;
    k.k_psi.reserve(length);
    k.k_x.reserve(length);
    for (std::size_t step = 0; step < length; ++step) {
        const Matrix row = v * dsys.b_bar;  // 1 x (d_psi + 1)
        std::vector<double> psi_row(dsys.d_psi);
        for (std::size_t j = 0; j < dsys.d_psi; ++j) psi_row[j] = row(0, j);
        k.k_psi.push_back(std::move(psi_row));
        k.k_x.push_back(row(0, dsys.d_psi));
        v = v * dsys.a_bar;
    }
    return k;
}

// ---------------------------------------------------------------------------
// Construction helpers and serialization.
// ---------------------------------------------------------------------------

/// Scale knobs for randomly sampled systems.
struct SystemScales {
    double decay_log_min = -1.5;  // A_h, A_v diagonal entries are -exp(u)
    double decay_log_max = 0.5;
    double coupling = 0.3;   // A_vh, A_hpsi, A_vpsi entry range
    double input = 1.0;      // B_h, B_v entry range
    double readout = 1.0;    // C_h, C_v entry range
    double projection = 0.5; // W_v entry range
};

/// Samples a stable system with diagonal state blocks. Diagonal entries are
/// parameterized as -exp(u), so both state blocks are Hurwitz by
/// construction. d_z = d_h + 1 matches the scan's feature layout [h_h, x].
inline ContinuousSystem sample_system(std::size_t d_h, std::size_t d_v, std::size_t d_psi,
                                      Rng& rng, const SystemScales& scales = {}) {
    ContinuousSystem sys;
    sys.d_h = d_h;
    sys.d_v = d_v;
    sys.d_psi = d_psi;

    auto fill = [&](Matrix& m, std::size_t r, std::size_t c, double amp) {
        m = Matrix(r, c);
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-amp, amp);
    };

    sys.a_h = Matrix(d_h, d_h);
    for (std::size_t i = 0; i < d_h; ++i)
        sys.a_h(i, i) = -std::exp(rng.uniform(scales.decay_log_min, scales.decay_log_max));
    sys.a_v = Matrix(d_v, d_v);
    for (std::size_t i = 0; i < d_v; ++i)
        sys.a_v(i, i) = -std::exp(rng.uniform(scales.decay_log_min, scales.decay_log_max));

    fill(sys.a_vh, d_v, d_h, scales.coupling);
    fill(sys.a_hpsi, d_h, d_psi, scales.coupling);
    fill(sys.a_vpsi, d_v, d_psi, scales.coupling);
    fill(sys.b_h, d_h, 1, scales.input);
    fill(sys.b_v, d_v, 1, scales.input);
    fill(sys.c_h, 1, d_h, scales.readout);
    fill(sys.c_v, 1, d_v, scales.readout);
    fill(sys.w_v, d_psi, d_h + 1, scales.projection);
    return sys;
}

inline io::KeyValueDoc to_key_values(const ContinuousSystem& sys) {
    io::KeyValueDoc doc;
    doc.set_count("d_h", sys.d_h);
    doc.set_count("d_v", sys.d_v);
    doc.set_count("d_psi", sys.d_psi);
    doc.set_count("d_z", sys.d_z());
    doc.set_matrix("A_h", sys.a_h);
    doc.set_matrix("A_v", sys.a_v);
    doc.set_matrix("A_vh", sys.a_vh);
    doc.set_matrix("A_hpsi", sys.a_hpsi);
    doc.set_matrix("A_vpsi", sys.a_vpsi);
    doc.set_matrix("B_h", sys.b_h);
    doc.set_matrix("B_v", sys.b_v);
    doc.set_matrix("C_h", sys.c_h);
    doc.set_matrix("C_v", sys.c_v);
    doc.set_matrix("W_v", sys.w_v);
    return doc;
}

inline ContinuousSystem system_from_key_values(const io::KeyValueDoc& doc) {
    ContinuousSystem sys;
    sys.d_h = doc.get_count("d_h");
    sys.d_v = doc.get_count("d_v");
    sys.d_psi = doc.get_count("d_psi");
    const std::size_t d_z = doc.get_count("d_z");
    sys.a_h = doc.get_matrix("A_h", sys.d_h, sys.d_h);
    sys.a_v = doc.get_matrix("A_v", sys.d_v, sys.d_v);
    sys.a_vh = doc.get_matrix("A_vh", sys.d_v, sys.d_h);
    sys.a_hpsi = doc.get_matrix("A_hpsi", sys.d_h, sys.d_psi);
    sys.a_vpsi = doc.get_matrix("A_vpsi", sys.d_v, sys.d_psi);
    sys.b_h = doc.get_matrix("B_h", sys.d_h, 1);
    sys.b_v = doc.get_matrix("B_v", sys.d_v, 1);
    sys.c_h = doc.get_matrix("C_h", 1, sys.d_h);
    sys.c_v = doc.get_matrix("C_v", 1, sys.d_v);
    sys.w_v = doc.get_matrix("W_v", sys.d_psi, d_z);
    sys.validate();
    return sys;
}

inline void save_system(const std::string& path, const ContinuousSystem& sys) {
    io::write_file(path, to_key_values(sys).serialize());
}

inline ContinuousSystem load_system(const std::string& path) {
    return system_from_key_values(io::KeyValueDoc::parse(io::read_file(path), path));
}

}  // namespace vi2d

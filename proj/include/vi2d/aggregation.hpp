#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "vi2d/matrix.hpp"

namespace vi2d {

enum class AggregatorKind { mean, sum, attention };

/// Pooling recipe for the global interaction field. Attention pooling uses a
/// single query vector against projected keys with a softmax over variables.
struct AggregatorSpec {
    AggregatorKind kind = AggregatorKind::mean;
    std::vector<double> query;  // attention only
    Matrix key_proj;            // attention only, d x d
    double temperature = 1.0;   // attention only, > 0

    static AggregatorSpec mean_pool() { return {}; }
    static AggregatorSpec sum_pool() { return {AggregatorKind::sum, {}, {}, 1.0}; }
    static AggregatorSpec attention_pool(std::vector<double> query, Matrix key_proj,
                                         double temperature = 1.0) {
        if (!(temperature > 0.0))
            throw std::domain_error("AggregatorSpec: temperature must be positive");
        return {AggregatorKind::attention, std::move(query), std::move(key_proj), temperature};
    }
};

namespace detail {

/// Pairwise reduction with a split pattern fixed by the leaf count alone.
inline double tree_reduce(std::span<const double> v) {
    if (v.size() == 1) return v[0];
    const std::size_t mid = v.size() / 2;
    return tree_reduce(v.subspan(0, mid)) + tree_reduce(v.subspan(mid));
}

/// Canonical accumulation order: indices sorted by row content, so the
/// reduction sequence depends only on the multiset of items. Together with
/// the fixed-shape tree this makes pooling bit-identical under any input
/// permutation.
inline std::vector<std::size_t> canonical_order(const Matrix& items) {
    std::vector<std::size_t> order(items.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ra = items.row(a);
        const auto rb = items.row(b);
        for (std::size_t j = 0; j < ra.size(); ++j) {
            if (ra[j] < rb[j]) return true;
            if (ra[j] > rb[j]) return false;
        }
        return false;
    });
    return order;
}

inline std::vector<double> ordered_column_sums(const Matrix& items,
                                               const std::vector<std::size_t>& order,
                                               const std::vector<double>* weights) {
    const std::size_t d = items.cols();
    std::vector<double> out(d, 0.0);
    std::vector<double> buf(items.rows());
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            const double v = items(order[i], j);
            buf[i] = weights ? (*weights)[order[i]] * v : v;
        }
        out[j] = tree_reduce(buf);
    }
    return out;
}

}  // namespace detail

/// Softmax weights of attention pooling, reported in the items' own order.
/// Per-item weights depend only on that item's content, so a permutation of
/// the items permutes the weights identically.
inline std::vector<double> attention_weights(const AggregatorSpec& spec, const Matrix& items) {
    if (spec.kind != AggregatorKind::attention)
        throw std::invalid_argument("attention_weights: spec is not attention");
    if (items.rows() == 0) throw std::domain_error("attention_weights: empty multiset");
    if (spec.key_proj.rows() != spec.key_proj.cols() || spec.key_proj.cols() != items.cols() ||
        spec.query.size() != items.cols())
        throw std::invalid_argument("attention_weights: dimension mismatch");
    if (!(spec.temperature > 0.0))
        throw std::domain_error("attention_weights: temperature must be positive");

    const std::size_t c = items.rows();
    std::vector<double> scores(c);
    for (std::size_t i = 0; i < c; ++i) {
        const auto key = mat_vec(spec.key_proj, items.row(i));
        scores[i] = dot(spec.query, key) / spec.temperature;
    }
    const double shift = *std::max_element(scores.begin(), scores.end());
    std::vector<double> weights(c);
    for (std::size_t i = 0; i < c; ++i) weights[i] = std::exp(scores[i] - shift);

    const auto order = detail::canonical_order(items);
    std::vector<double> buf(c);
    for (std::size_t i = 0; i < c; ++i) buf[i] = weights[order[i]];
    const double denom = detail::tree_reduce(buf);
    for (double& w : weights) w /= denom;
    return weights;
}

/// Pools a multiset of equal-width vectors (one item per row) into a single
/// vector. The result is independent of item order, bit for bit.
inline std::vector<double> pool(const AggregatorSpec& spec, const Matrix& items) {
    if (items.rows() == 0) throw std::domain_error("pool: empty multiset");
    if (items.cols() == 1 && spec.kind != AggregatorKind::attention) {
        // Width-one multisets sort by value directly; same canonical order,
        // same reduction tree, no index indirection.
        std::vector<double> values(items.data(), items.data() + items.rows());
        std::sort(values.begin(), values.end());
        const double total = detail::tree_reduce(values);
        if (spec.kind == AggregatorKind::sum) return {total};
        return {total * (1.0 / static_cast<double>(items.rows()))};
    }
    const auto order = detail::canonical_order(items);
    switch (spec.kind) {
        case AggregatorKind::sum:
            return detail::ordered_column_sums(items, order, nullptr);
        case AggregatorKind::mean: {
            auto out = detail::ordered_column_sums(items, order, nullptr);
            const double inv = 1.0 / static_cast<double>(items.rows());
            for (double& v : out) v *= inv;
            return out;
        }
        case AggregatorKind::attention: {
            const auto weights = attention_weights(spec, items);
            return detail::ordered_column_sums(items, order, &weights);
        }
    }
    throw std::logic_error("pool: unknown aggregator kind");
}

/// Global interaction field: shared projection of each variable's feature
/// followed by permutation-invariant pooling.
inline std::vector<double> compute_psi(const Matrix& w_v, const Matrix& z_slice,
                                       const AggregatorSpec& spec) {
    if (w_v.cols() != z_slice.cols())
        throw std::invalid_argument("compute_psi: projection width does not match features");
    Matrix projected(z_slice.rows(), w_v.rows());
    for (std::size_t c = 0; c < z_slice.rows(); ++c) {
        auto out = projected.row(c);
        for (std::size_t r = 0; r < w_v.rows(); ++r) out[r] = dot(w_v.row(r), z_slice.row(c));
    }
    return pool(spec, projected);
}

}  // namespace vi2d

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "madsel/error.hpp"

namespace madsel {

/// Binned column: one bin index per sample.
struct DiscretizedColumn {
    std::vector<std::uint32_t> assignments;
    std::uint32_t n_bins = 1;
    /// Lower edges of bins 1..n_bins-1; a value v falls in bin #{edges <= v}.
    std::vector<double> edges;

    std::size_t size() const { return assignments.size(); }
};

/// Class labels: 0 = bona fide, 1 = morph.
struct LabelColumn {
    std::vector<std::uint8_t> labels;

    LabelColumn() = default;
    explicit LabelColumn(std::vector<std::uint8_t> v) : labels(std::move(v)) {
        for (auto l : labels)
            if (l > 1) throw ArgumentError("labels must be 0 (bona fide) or 1 (morph)");
    }

    std::size_t size() const { return labels.size(); }

    DiscretizedColumn column() const {
        DiscretizedColumn c;
        c.assignments.assign(labels.begin(), labels.end());
        c.n_bins = 2;
        return c;
    }
};

/// min(16, ceil(sqrt(n)))
inline std::uint32_t default_bin_count(std::size_t n_samples) {
    const auto root = static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(n_samples))));
    return std::clamp<std::uint32_t>(root, 1, 16);
}

/// Equal-frequency binning. Columns with at most n_bins distinct values get one
/// bin per value. Otherwise edges sit at the empirical k/n_bins quantiles;
/// duplicate edges and edges at the minimum are dropped so equal values always
/// share a bin and every bin is non-empty. Rank-based, hence invariant under
/// strictly increasing transforms of the column.
template <class T>
DiscretizedColumn discretize(std::span<const T> values, std::uint32_t n_bins) {
    if (values.empty()) throw ArgumentError("cannot discretize an empty column");
    if (n_bins < 1) throw ArgumentError("bin count must be >= 1");
    std::vector<double> sorted(values.begin(), values.end());
    for (double v : sorted)
        if (!std::isfinite(v)) throw ArgumentError("cannot discretize non-finite values");
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    DiscretizedColumn out;
    if (distinct.size() <= n_bins) {
        out.edges.assign(distinct.begin() + 1, distinct.end());
    } else {
        for (std::uint32_t k = 1; k < n_bins; ++k) {
            const double e = sorted[k * n / n_bins];
            if (e > sorted.front() && (out.edges.empty() || e > out.edges.back())) out.edges.push_back(e);
        }
    }
    out.n_bins = static_cast<std::uint32_t>(out.edges.size() + 1);
    out.assignments.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(values[i]);
        out.assignments[i] =
            static_cast<std::uint32_t>(std::upper_bound(out.edges.begin(), out.edges.end(), v) - out.edges.begin());
    }
    return out;
}

template <class T>
DiscretizedColumn discretize(const std::vector<T>& values, std::uint32_t n_bins) {
    return discretize(std::span<const T>(values), n_bins);
}

namespace detail {

inline double entropy_from_counts(std::span<const std::uint32_t> counts, std::size_t n) {
    double h = 0.0;
    const double dn = static_cast<double>(n);
    for (auto c : counts)
        if (c > 0) {
            const double p = c / dn;
            h -= p * std::log2(p);
        }
    return h;
}

/// Plug-in MI of a contingency table (row-major nx x ny) with n samples.
inline double mi_from_table(std::span<const std::uint32_t> table, std::size_t nx, std::size_t ny, std::size_t n) {
    if (n == 0) return 0.0;
    thread_local std::vector<std::uint32_t> rows, cols;
    rows.assign(nx, 0);
    cols.assign(ny, 0);
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) {
            rows[x] += table[x * ny + y];
            cols[y] += table[x * ny + y];
        }
    const double dn = static_cast<double>(n);
    double mi = 0.0;
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) {
            const auto c = table[x * ny + y];
            if (c == 0) continue;
            mi += (c / dn) * std::log2(c * dn / (static_cast<double>(rows[x]) * cols[y]));
        }
    return std::max(0.0, mi);
}

inline void require_same_length(std::size_t a, std::size_t b) {
    if (a != b) throw ArgumentError("columns have different sample counts");
}

}  // namespace detail

/// H(X) in bits.
inline double entropy(const DiscretizedColumn& x) {
    if (x.size() == 0) throw ArgumentError("entropy of an empty column");
    std::vector<std::uint32_t> counts(x.n_bins, 0);
    for (auto a : x.assignments) ++counts[a];
    return detail::entropy_from_counts(counts, x.size());
}

/// Plug-in MI(X;Y) in bits, clamped at 0.
inline double mutual_information(const DiscretizedColumn& x, const DiscretizedColumn& y) {
    detail::require_same_length(x.size(), y.size());
    thread_local std::vector<std::uint32_t> table;
    table.assign(static_cast<std::size_t>(x.n_bins) * y.n_bins, 0);
    for (std::size_t i = 0; i < x.size(); ++i) ++table[x.assignments[i] * y.n_bins + y.assignments[i]];
    return detail::mi_from_table(table, x.n_bins, y.n_bins, x.size());
}

inline double mutual_information(const DiscretizedColumn& x, const LabelColumn& y) {
    return mutual_information(x, y.column());
}

/// MI(X;Y|Z) = sum_z p(z) MI(X;Y | Z=z), per-stratum plug-in estimates.
/// Strata with fewer than two samples contribute nothing.
inline double conditional_mi(const DiscretizedColumn& x, const DiscretizedColumn& y, const DiscretizedColumn& z) {
    detail::require_same_length(x.size(), y.size());
    detail::require_same_length(x.size(), z.size());
    const std::size_t nx = x.n_bins, ny = y.n_bins, nz = z.n_bins;
    thread_local std::vector<std::uint32_t> table;
    table.assign(nx * ny * nz, 0);
    std::vector<std::uint32_t> zcount(nz, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        ++table[(z.assignments[i] * nx + x.assignments[i]) * ny + y.assignments[i]];
        ++zcount[z.assignments[i]];
    }
    const double n = static_cast<double>(x.size());
    double cmi = 0.0;
    for (std::size_t k = 0; k < nz; ++k) {
        if (zcount[k] < 2) continue;
        const std::span<const std::uint32_t> stratum(table.data() + k * nx * ny, nx * ny);
        cmi += (zcount[k] / n) * detail::mi_from_table(stratum, nx, ny, zcount[k]);
    }
    return std::max(0.0, cmi);
}

inline double conditional_mi(const DiscretizedColumn& x, const LabelColumn& y, const DiscretizedColumn& z) {
    return conditional_mi(x, y.column(), z);
}

/// MI / min(H(X), H(Y)); 0 when either side is constant.
inline double normalized_mi(const DiscretizedColumn& x, const DiscretizedColumn& y) {
    detail::require_same_length(x.size(), y.size());
    const double h = std::min(entropy(x), entropy(y));
    if (h <= 0.0) return 0.0;
    return std::clamp(mutual_information(x, y) / h, 0.0, 1.0);
}

/// Joint variable of several columns, relabelled densely in order of first appearance.
inline DiscretizedColumn joint_column(std::span<const DiscretizedColumn* const> parts) {
    if (parts.empty()) throw ArgumentError("joint column of nothing");
    const std::size_t n = parts.front()->size();
    for (const auto* p : parts) detail::require_same_length(n, p->size());
    std::unordered_map<std::uint64_t, std::uint32_t> ids;
    DiscretizedColumn out;
    out.assignments.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t key = 0;
        for (const auto* p : parts) key = key * p->n_bins + p->assignments[i];
        auto [it, inserted] = ids.try_emplace(key, static_cast<std::uint32_t>(ids.size()));
        out.assignments[i] = it->second;
    }
    out.n_bins = static_cast<std::uint32_t>(std::max<std::size_t>(1, ids.size()));
    return out;
}

}  // namespace madsel

#pragma once

// Isotropy measurements: explained-variance spectrum, the distribution of
// per-dimension standard deviations, and a correlation-driven reordering of
// dimensions for block-structure inspection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "isokit/linalg.hpp"

namespace isokit {

struct EVSpectrum {
    std::vector<double> values;  // values[k-1] = EV_k
    Vector singular_values;      // of the column-centered matrix, descending
};

/// EV_k = sum_{i<=k} lambda_i^2 / sum_j lambda_j^2 over the singular values of
/// the column-centered h. lambda_i^2 come from the d x d Gram matrix, so the
/// spectrum is invariant to scaling and to a constant offset of every sample.
inline EVSpectrum explained_variance(const EmbeddingMatrix& h, std::size_t k) {
    if (h.n_samples() < 2) {
        throw InsufficientDataError("explained variance needs at least 2 samples, got " +
                                    std::to_string(h.n_samples()));
    }
    if (k < 1 || k > h.dim()) {
        throw ContractError("K must lie in [1, " + std::to_string(h.dim()) + "], got " + std::to_string(k));
    }
    const Matrix centered = h.values().rowwise() - h.values().colwise().mean();
    Matrix gram = centered.transpose() * centered;
    gram = 0.5 * (gram + gram.transpose());
    const Vector w = sym_eigendecompose(gram).eigenvalues.cwiseMax(0.0);

    std::vector<double> prefix(static_cast<std::size_t>(w.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        acc += w(i);
        prefix[static_cast<std::size_t>(i)] = acc;
    }
    const double total = prefix.back();
    if (!(total > 0.0)) {
        throw InsufficientDataError("embedding has zero variance in every dimension");
    }
    EVSpectrum out;
    out.singular_values = w.cwiseSqrt();
    out.values.resize(k);
    for (std::size_t i = 0; i < k; ++i) out.values[i] = std::min(prefix[i] / total, 1.0);
    return out;
}

struct StdBucket {
    double lower_edge;
    std::size_t count;
};

struct StdDistribution {
    std::vector<StdBucket> histogram;  // log10-spaced
    std::size_t underflow_count = 0;   // dimensions with std below kStdFloor
    double min = 0;
    double max = 0;
    double median = 0;
};

/// Stds below this are reported in the underflow bucket rather than the histogram.
inline constexpr double kStdFloor = 1e-12;

/// Histogram of per-dimension stds over log10-spaced buckets spanning
/// [max(min std, 1e-12), max std]. The top edge is inclusive.
inline StdDistribution std_distribution(const EmbeddingMatrix& h, std::size_t n_buckets) {
    if (h.n_samples() < 2) {
        throw InsufficientDataError("std distribution needs at least 2 samples, got " +
                                    std::to_string(h.n_samples()));
    }
    if (n_buckets < 1) throw ContractError("need at least one bucket");

    const Vector std = compute_moments(h).std;
    std::vector<double> sorted(std.data(), std.data() + std.size());
    std::sort(sorted.begin(), sorted.end());

    StdDistribution out;
    out.min = sorted.front();
    out.max = sorted.back();
    const std::size_t n = sorted.size();
    out.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    double lo = kStdFloor;
    for (double s : sorted) {
        if (s >= kStdFloor) {
            lo = s;
            break;
        }
    }
    const double hi = std::max(out.max, lo);
    const double log_lo = std::log10(lo);
    const double width = (std::log10(hi) - log_lo) / static_cast<double>(n_buckets);

    out.histogram.resize(n_buckets);
    for (std::size_t b = 0; b < n_buckets; ++b) {
        out.histogram[b] = {std::pow(10.0, log_lo + width * static_cast<double>(b)), 0};
    }
    for (double s : sorted) {
        if (s < kStdFloor) {
            ++out.underflow_count;
            continue;
        }
        std::size_t b = 0;
        if (width > 0.0) {
            const double pos = std::floor((std::log10(s) - log_lo) / width);
            b = pos <= 0.0 ? 0 : std::min(static_cast<std::size_t>(pos), n_buckets - 1);
        }
        ++out.histogram[b].count;
    }
    return out;
}

struct CorrelationClustering {
    std::vector<std::size_t> permutation;     // new position -> original dimension
    std::vector<std::size_t> cluster_sizes;   // in permutation order
    std::vector<std::size_t> cluster_bounds;  // split indices into permutation
    Matrix abs_corr_reordered;
};

/// Average-linkage agglomerative clustering on 1 - |rho|, merging while the
/// closest pair of clusters is within 1 - tau. Clusters are emitted by
/// descending size (ties: smallest member first); members keep index order.
inline CorrelationClustering cluster_correlations(const Matrix& rho, double tau) {
    require_symmetric(rho);
    if (!(tau > 0.0 && tau < 1.0)) throw ContractError("threshold tau must lie in (0, 1)");
    const auto d = static_cast<std::size_t>(rho.rows());
    const double cut = 1.0 - tau;

    // dist holds average linkage between live clusters; naive O(d^3) merge loop.
    Matrix dist = 1.0 - rho.cwiseAbs().array();
    std::vector<std::vector<std::size_t>> members(d);
    std::vector<bool> alive(d, true);
    for (std::size_t i = 0; i < d; ++i) members[i] = {i};

    for (std::size_t live = d; live > 1; --live) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t a = 0, b = 0;
        for (std::size_t i = 0; i < d; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < d; ++j) {
                if (alive[j] && dist(i, j) < best) {
                    best = dist(i, j);
                    a = i;
                    b = j;
                }
            }
        }
        if (best > cut) break;
        const double na = static_cast<double>(members[a].size());
        const double nb = static_cast<double>(members[b].size());
        for (std::size_t k = 0; k < d; ++k) {
            if (!alive[k] || k == a || k == b) continue;
            const double merged = (na * dist(a, k) + nb * dist(b, k)) / (na + nb);
            dist(a, k) = merged;
            dist(k, a) = merged;
        }
        members[a].insert(members[a].end(), members[b].begin(), members[b].end());
        std::sort(members[a].begin(), members[a].end());
        members[b].clear();
        alive[b] = false;
    }

    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < d; ++i)
        if (alive[i]) clusters.push_back(std::move(members[i]));
    std::stable_sort(clusters.begin(), clusters.end(), [](const auto& x, const auto& y) {
        if (x.size() != y.size()) return x.size() > y.size();
        return x.front() < y.front();
    });

    CorrelationClustering out;
    for (const auto& c : clusters) {
        out.cluster_sizes.push_back(c.size());
        out.permutation.insert(out.permutation.end(), c.begin(), c.end());
        if (out.permutation.size() < d) out.cluster_bounds.push_back(out.permutation.size());
    }
    const auto n = static_cast<Eigen::Index>(d);
    out.abs_corr_reordered.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out.abs_corr_reordered(i, j) = std::abs(rho(static_cast<Eigen::Index>(out.permutation[i]),
                                                        static_cast<Eigen::Index>(out.permutation[j])));
        }
    }
    return out;
}

}  // namespace isokit

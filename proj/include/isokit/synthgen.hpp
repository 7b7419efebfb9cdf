#pragma once

// Synthetic embeddings with planted correlation blocks, a target std profile
// and an optional 2-class label signal.
//
// Dimension j inside group g is  sqrt(r) f_g + sqrt(1 - r) z_j,  scaled by
// std_profile[j]; dimensions outside every group are z_j scaled alike. With
// r = 1 the members of a group are exact multiples of the shared factor, so
// duplicated columns are produced by construction. Groups occupy consecutive
// dimensions starting at `group_offset`.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "isokit/linalg.hpp"
#include "isokit/random.hpp"

namespace isokit {

struct SyntheticSpec {
    std::size_t n_samples = 0;
    std::size_t dim = 0;
    std::vector<std::size_t> group_sizes;
    std::size_t group_offset = 0;
    double within_group_corr = 0.0;
    std::vector<double> std_profile;  // empty = all ones
    std::optional<std::vector<double>> label_axis;
    double label_noise = 0.0;  // probability of flipping each label
    std::uint64_t seed = 0;

    std::vector<double> resolved_std() const {
        return std_profile.empty() ? std::vector<double>(dim, 1.0) : std_profile;
    }

    /// Target covariance D R D implied by the spec.
    Matrix target_covariance() const {
        validate();
        const auto d = static_cast<Eigen::Index>(dim);
        Matrix rho = Matrix::Identity(d, d);
        std::size_t start = group_offset;
        for (std::size_t g : group_sizes) {
            for (std::size_t i = start; i < start + g; ++i)
                for (std::size_t j = start; j < start + g; ++j)
                    if (i != j) rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = within_group_corr;
            start += g;
        }
        const std::vector<double> s = resolved_std();
        const Vector sv = Eigen::Map<const Vector>(s.data(), d);
        return sv.asDiagonal() * rho * sv.asDiagonal();
    }

    void validate() const {
        auto fail = [](const std::string& msg) { throw DataError("invalid_spec", msg); };
        if (n_samples < 1 || dim < 1) fail("n_samples and dim must be positive");
        std::size_t used = 0;
        for (std::size_t g : group_sizes) {
            if (g < 1) fail("group sizes must be positive");
            used += g;
        }
        if (group_offset + used > dim) fail("groups do not fit inside dim");
        if (!(within_group_corr >= 0.0 && within_group_corr <= 1.0))
            fail("within_group_corr must lie in [0, 1]");
        if (!std_profile.empty()) {
            if (std_profile.size() != dim) fail("std_profile length must equal dim");
            for (double s : std_profile)
                if (!(s > 0.0) || !std::isfinite(s)) fail("std_profile entries must be finite and > 0");
        }
        if (label_axis) {
            if (label_axis->size() != dim) fail("label_axis length must equal dim");
            for (double a : *label_axis)
                if (!std::isfinite(a)) fail("label_axis entries must be finite");
        }
        if (!(label_noise >= 0.0 && label_noise <= 0.5)) fail("label_noise must lie in [0, 0.5]");
    }
};

struct SyntheticData {
    EmbeddingMatrix embeddings;
    std::optional<std::vector<int>> labels;
};

inline SyntheticData generate(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n_samples;
    const std::size_t d = spec.dim;
    const std::vector<double> scale = spec.resolved_std();

    // group index per dimension, -1 when independent
    std::vector<long> group_of(d, -1);
    std::size_t start = spec.group_offset;
    for (std::size_t g = 0; g < spec.group_sizes.size(); ++g) {
        for (std::size_t j = start; j < start + spec.group_sizes[g]; ++j) group_of[j] = static_cast<long>(g);
        start += spec.group_sizes[g];
    }
    const double shared = std::sqrt(spec.within_group_corr);
    const double own = std::sqrt(1.0 - spec.within_group_corr);

    CounterRng noise(spec.seed, 0);
    CounterRng factors(spec.seed, 1);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<double> f(spec.group_sizes.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : f) v = factors.gaussian();
        for (std::size_t j = 0; j < d; ++j) {
            const double z = noise.gaussian();
            const double v = group_of[j] < 0 ? z : shared * f[static_cast<std::size_t>(group_of[j])] + own * z;
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scale[j] * v;
        }
    }

    std::optional<std::vector<int>> labels;
    if (spec.label_axis) {
        CounterRng flips(spec.seed, 2);
        const Vector axis = Eigen::Map<const Vector>(spec.label_axis->data(), static_cast<Eigen::Index>(d));
        labels.emplace(n);
        for (std::size_t i = 0; i < n; ++i) {
            int y = x.row(static_cast<Eigen::Index>(i)).dot(axis) > 0.0 ? 1 : 0;
            if (flips.uniform() < spec.label_noise) y = 1 - y;
            (*labels)[i] = y;
        }
    }
    return {EmbeddingMatrix(std::move(x)), std::move(labels)};
}

}  // namespace isokit

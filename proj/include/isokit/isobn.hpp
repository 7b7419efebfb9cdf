#pragma once

// Isotropic batch normalization with moving moment caches.
//
// Training calls fold the batch standard deviation and covariance into the
// caches (the first batch initializes them directly); every call then derives
// the correlation, the soft group sizes gamma and the per-dimension scaling
// theta_bar from the caches and returns theta_bar (.) h. No mean is subtracted.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "isokit/binary.hpp"
#include "isokit/linalg.hpp"
#include "isokit/normalizers.hpp"

namespace isokit {

struct IsoBNConfig {
    double momentum = 0.95;   // alpha, weight of the new batch in the cache update
    double strength = 1.0;    // beta; 0 is the identity transform
    double stabilizer = 0.1;  // epsilon, added after sigma_i * gamma_i
    // Use sqrt(c) as the renormalization constant, which preserves the sum of
    // variances exactly. Off by default: c itself is the published constant.
    bool exact_variance_renorm = false;

    void validate() const {
        if (!(momentum > 0.0 && momentum <= 1.0)) throw ContractError("momentum must lie in (0, 1]");
        if (!(strength >= 0.0) || !std::isfinite(strength)) throw ContractError("strength must be >= 0");
        if (!(stabilizer > 0.0) || !std::isfinite(stabilizer)) throw ContractError("stabilizer must be > 0");
    }
};

/// Moving covariance and moving standard deviation.
class MomentCache {
public:
    explicit MomentCache(std::size_t dim)
        : cov_(Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
          std_(Vector::Zero(static_cast<Eigen::Index>(dim))) {
        if (dim == 0) throw ContractError("moment cache dimension must be positive");
    }

    /// Cache holding the given statistics, as if `update_count` batches had been seen.
    static MomentCache from_statistics(Vector std, Matrix cov, std::uint64_t update_count = 1) {
        if (std.size() == 0 || cov.rows() != std.size() || cov.cols() != std.size()) {
            throw DimensionMismatchError("cache statistics have inconsistent dimensions");
        }
        require_symmetric(cov);
        if ((std.array() < 0.0).any() || !std.allFinite() || !cov.allFinite()) {
            throw DataError("invalid_cache", "cache statistics must be finite with non-negative std");
        }
        MomentCache c(static_cast<std::size_t>(std.size()));
        c.std_ = std::move(std);
        c.cov_ = std::move(cov);
        c.update_count_ = update_count;
        return c;
    }

    std::size_t dim() const noexcept { return static_cast<std::size_t>(std_.size()); }
    bool initialized() const noexcept { return update_count_ > 0; }
    std::uint64_t update_count() const noexcept { return update_count_; }
    const Matrix& moving_cov() const noexcept { return cov_; }
    const Vector& moving_std() const noexcept { return std_; }

    /// Fold one batch into the caches: copy on the first batch, otherwise
    /// x <- x + alpha (x_batch - x).
    void update(const Vector& batch_std, const Matrix& batch_cov, double alpha) {
        if (batch_std.size() != std_.size() || batch_cov.rows() != cov_.rows()) {
            throw DimensionMismatchError("batch statistics do not match cache dimension");
        }
        if (update_count_ == 0) {
            std_ = batch_std;
            cov_ = batch_cov;
        } else {
            std_ += alpha * (batch_std - std_);
            cov_ += alpha * (batch_cov - cov_);
        }
        ++update_count_;
    }

    void save(std::ostream& out) const;
    static MomentCache load(std::istream& in);
    void save(const std::string& path) const;
    static MomentCache load(const std::string& path);

private:
    Matrix cov_;
    Vector std_;
    std::uint64_t update_count_ = 0;
};

struct ScalingVector {
    Vector gamma;       // soft group sizes from the cache correlation
    Vector theta;       // (sigma_i gamma_i + eps)^-beta
    Vector theta_bar;   // renorm * theta
    double renorm = 1;  // sum sigma^2 / sum sigma^2 theta^2 (or its sqrt)
};

inline ScalingVector compute_scaling(const MomentCache& cache, const IsoBNConfig& config) {
    config.validate();
    if (!cache.initialized()) throw UninitializedCacheError();
    const Vector& sigma = cache.moving_std();
    const Matrix rho = correlation_from_covariance(cache.moving_cov(), sigma);

    ScalingVector s;
    s.gamma = compute_gamma(rho).gamma;
    s.theta = (sigma.array() * s.gamma.array() + config.stabilizer).pow(-config.strength).matrix();

    const double total = sigma.squaredNorm();
    const double scaled = (sigma.array().square() * s.theta.array().square()).sum();
    // All-dead cache: nothing to preserve, leave theta unscaled.
    s.renorm = scaled > 0.0 ? total / scaled : 1.0;
    if (config.exact_variance_renorm) s.renorm = std::sqrt(s.renorm);
    s.theta_bar = s.renorm * s.theta;
    return s;
}

/// Inference: scale h by the cache-derived theta_bar. The cache is untouched.
inline EmbeddingMatrix isobn_apply(const EmbeddingMatrix& h, const MomentCache& cache,
                                   const IsoBNConfig& config) {
    if (h.dim() != cache.dim()) {
        throw DimensionMismatchError("embedding dimension " + std::to_string(h.dim()) +
                                     " does not match cache dimension " + std::to_string(cache.dim()));
    }
    const ScalingVector s = compute_scaling(cache, config);
    return EmbeddingMatrix(h.values() * s.theta_bar.asDiagonal());
}

/// Training: update the cache from this batch, then apply the updated cache.
inline EmbeddingMatrix isobn_train_step(const EmbeddingMatrix& h, MomentCache& cache,
                                        const IsoBNConfig& config) {
    config.validate();
    if (h.dim() != cache.dim()) {
        throw DimensionMismatchError("embedding dimension " + std::to_string(h.dim()) +
                                     " does not match cache dimension " + std::to_string(cache.dim()));
    }
    const MomentEstimates batch = compute_moments(h);
    cache.update(batch.std, batch.covariance, config.momentum);
    return isobn_apply(h, cache, config);
}

enum class Mode { train, infer };

inline EmbeddingMatrix isobn_step(const EmbeddingMatrix& h, MomentCache& cache, const IsoBNConfig& config,
                                  Mode mode) {
    return mode == Mode::train ? isobn_train_step(h, cache, config) : isobn_apply(h, cache, config);
}

/// Owns a cache and a configuration; the layer form of isobn_step.
class IsoBatchNorm {
public:
    IsoBatchNorm(std::size_t dim, IsoBNConfig config) : cache_(dim), config_(config) { config_.validate(); }
    IsoBatchNorm(MomentCache cache, IsoBNConfig config) : cache_(std::move(cache)), config_(config) {
        config_.validate();
    }

    EmbeddingMatrix train(const EmbeddingMatrix& h) { return isobn_train_step(h, cache_, config_); }
    EmbeddingMatrix infer(const EmbeddingMatrix& h) const { return isobn_apply(h, cache_, config_); }
    ScalingVector scaling() const { return compute_scaling(cache_, config_); }

    const MomentCache& cache() const noexcept { return cache_; }
    const IsoBNConfig& config() const noexcept { return config_; }

private:
    MomentCache cache_;
    IsoBNConfig config_;
};

// Cache file layout (little-endian):
//   "IBNC" | version u32 | d u64 | update_count u64 | sigma d x f64 | Sigma d*d x f64 row-major
inline constexpr std::string_view kCacheMagic = "IBNC";
inline constexpr std::uint32_t kCacheVersion = 1;

inline void MomentCache::save(std::ostream& out) const {
    const auto d = static_cast<Eigen::Index>(dim());
    binary::write_magic(out, kCacheMagic);
    binary::write_u32(out, kCacheVersion);
    binary::write_u64(out, static_cast<std::uint64_t>(d));
    binary::write_u64(out, update_count_);
    for (Eigen::Index i = 0; i < d; ++i) binary::write_f64(out, std_(i));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) binary::write_f64(out, cov_(i, j));
}

inline MomentCache MomentCache::load(std::istream& in) {
    binary::expect_magic(in, kCacheMagic);
    const std::uint32_t version = binary::read_u32(in, "cache version");
    if (version != kCacheVersion) {
        throw MalformedFileError("unsupported cache format version " + std::to_string(version));
    }
    const std::uint64_t d = binary::read_u64(in, "cache dimension");
    if (d == 0 || d > (1u << 16)) throw MalformedFileError("implausible cache dimension " + std::to_string(d));
    const std::uint64_t count = binary::read_u64(in, "cache update count");
    const auto n = static_cast<Eigen::Index>(d);
    Vector sigma(n);
    Matrix cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) sigma(i) = binary::read_f64(in, "cache std");
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) cov(i, j) = binary::read_f64(in, "cache covariance");
    if (in.peek() != std::char_traits<char>::eof()) throw MalformedFileError("trailing bytes after cache payload");
    MomentCache cache(static_cast<std::size_t>(d));
    if (count > 0) cache = from_statistics(std::move(sigma), std::move(cov), count);
    return cache;
}

inline void MomentCache::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save(out);
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

inline MomentCache MomentCache::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return load(in);
}

}  // namespace isokit

#pragma once

// Stateless transforms: ZCA whitening, batch normalization, and the core
// isotropic batch normalization that divides each centered dimension by
// std_i * gamma_i.

#include "isokit/linalg.hpp"

namespace isokit {

/// (h - mu) * Sigma^{-1/2}. Sample covariance of the result is the identity.
/// Propagates IllConditionedError for (near-)singular covariances, which is the
/// usual outcome for embeddings with duplicated or strongly correlated dimensions.
inline EmbeddingMatrix whiten(const EmbeddingMatrix& h) {
    const MomentEstimates m = compute_moments(h);
    const Matrix w = inverse_sqrt(m.covariance);
    Matrix centered = h.values().rowwise() - m.mean.transpose();
    return EmbeddingMatrix(centered * w);
}

/// Per-column (x - mu_i) / sigma_i; constant columns map to zeros.
inline EmbeddingMatrix batch_normalize(const EmbeddingMatrix& h) {
    const MomentEstimates m = compute_moments(h);
    Matrix out = h.values().rowwise() - m.mean.transpose();
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        if (m.std(j) > 0.0) {
            out.col(j) /= m.std(j);
        } else {
            out.col(j).setZero();
        }
    }
    return EmbeddingMatrix(std::move(out));
}

/// Soft feature-group size per dimension.
struct GroupSizeVector {
    Vector gamma;
};

/// gamma_i = sum_j rho_ij^2. Equals the group size exactly when |rho| is a
/// block-diagonal 0/1 matrix.
inline GroupSizeVector compute_gamma(const Matrix& rho) {
    require_symmetric(rho);
    return {rho.array().square().rowwise().sum().matrix()};
}

/// Column i becomes (h_i - mu_i) / (sigma_i * gamma_i). Columns with
/// sigma_i * gamma_i == 0 map to zeros, matching batch_normalize.
inline EmbeddingMatrix isobn_core_transform(const EmbeddingMatrix& h, const MomentEstimates& moments,
                                            const GroupSizeVector& gamma) {
    const auto d = static_cast<Eigen::Index>(h.dim());
    if (moments.mean.size() != d || moments.std.size() != d || gamma.gamma.size() != d) {
        throw DimensionMismatchError("moments/gamma dimension does not match the embedding");
    }
    Matrix out = h.values().rowwise() - moments.mean.transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
        const double denom = moments.std(j) * gamma.gamma(j);
        if (denom > 0.0) {
            out.col(j) /= denom;
        } else {
            out.col(j).setZero();
        }
    }
    return EmbeddingMatrix(std::move(out));
}

}  // namespace isokit

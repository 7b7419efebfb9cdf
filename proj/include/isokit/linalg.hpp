#pragma once

// Dense kernels shared by every other isokit module: the embedding container,
// first/second moments and the symmetric eigen machinery.
//
// Conventions:
//   * embeddings are stored sample-major, one row per sample (N x d);
//   * all covariances use the 1/N batch convention, never 1/(N-1);
//   * a dimension with zero variance has correlation 0 with every other
//     dimension and 1 with itself.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

#include <Eigen/Dense>

#include "isokit/error.hpp"

namespace isokit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// N x d matrix of finite row-vector embeddings, N >= 1 and d >= 1.
class EmbeddingMatrix {
public:
    explicit EmbeddingMatrix(Matrix data) : data_(std::move(data)) {
        if (data_.rows() < 1 || data_.cols() < 1) {
            throw DataError("empty_matrix", "embedding matrix needs at least one row and one column");
        }
        for (Eigen::Index j = 0; j < data_.cols(); ++j) {
            for (Eigen::Index i = 0; i < data_.rows(); ++i) {
                if (!std::isfinite(data_(i, j))) {
                    throw NonFiniteError(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                }
            }
        }
    }

    std::size_t n_samples() const noexcept { return static_cast<std::size_t>(data_.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(data_.cols()); }
    const Matrix& values() const noexcept { return data_; }
    double operator()(std::size_t i, std::size_t j) const {
        return data_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

private:
    Matrix data_;
};

struct MomentEstimates {
    Vector mean;
    Vector std;
    Matrix covariance;
    Matrix correlation;
};

/// rho_ij = cov_ij / (std_i std_j), clamped to [-1, 1]. Zero-variance pairs get 0
/// off the diagonal; the diagonal is always exactly 1.
inline Matrix correlation_from_covariance(const Matrix& covariance, const Vector& std) {
    const Eigen::Index d = covariance.rows();
    Matrix rho(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        rho(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const double denom = std(i) * std(j);
            double r = denom > 0.0 ? covariance(i, j) / denom : 0.0;
            r = std::clamp(r, -1.0, 1.0);
            rho(i, j) = r;
            rho(j, i) = r;
        }
    }
    return rho;
}

/// Two-pass column moments with the 1/N covariance convention.
inline MomentEstimates compute_moments(const EmbeddingMatrix& h) {
    const Matrix& x = h.values();
    const auto n = static_cast<double>(x.rows());
    const Eigen::Index d = x.cols();

    MomentEstimates m;
    m.mean = x.colwise().sum().transpose() / n;
    const Matrix centered = x.rowwise() - m.mean.transpose();

    m.covariance.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i; j < d; ++j) {
            const double c = centered.col(i).dot(centered.col(j)) / n;
            m.covariance(i, j) = c;
            m.covariance(j, i) = c;
        }
    }
    m.std = m.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    m.correlation = correlation_from_covariance(m.covariance, m.std);
    return m;
}

struct EigenDecomposition {
    Vector eigenvalues;   // descending
    Matrix eigenvectors;  // column i pairs with eigenvalues(i)
};

inline double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

/// Throws ContractError unless max|A - A^T| <= rel_tol * max|A|.
inline void require_symmetric(const Matrix& a, double rel_tol = 1e-10) {
    if (a.rows() != a.cols()) {
        throw ContractError("matrix is not square");
    }
    const double scale = max_abs(a);
    const double asym = max_abs(a - a.transpose());
    if (asym > rel_tol * scale) {
        throw ContractError("matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending. Each eigenvector is
/// sign-normalized so its largest-magnitude entry is positive, which makes the
/// output a deterministic function of the input.
inline EigenDecomposition sym_eigendecompose(const Matrix& a) {
    require_symmetric(a);
    const Matrix sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorKind::numerical, "eigensolver_failed", "symmetric eigensolver did not converge");
    }
    const Eigen::Index d = sym.rows();
    EigenDecomposition out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors = solver.eigenvectors().rowwise().reverse();
    for (Eigen::Index k = 0; k < d; ++k) {
        Eigen::Index arg = 0;
        out.eigenvectors.col(k).cwiseAbs().maxCoeff(&arg);
        if (out.eigenvectors(arg, k) < 0.0) out.eigenvectors.col(k) *= -1.0;
    }
    return out;
}

/// Conditioning threshold for inverse_sqrt: smallest eigenvalue must exceed
/// kConditioningThreshold * largest.
inline constexpr double kConditioningThreshold = 1e-10;

/// A^{-1/2} for a symmetric positive-definite A, as V diag(w^{-1/2}) V^T.
/// Throws IllConditionedError when the spectrum violates the threshold.
inline Matrix inverse_sqrt(const Matrix& a) {
    const EigenDecomposition eig = sym_eigendecompose(a);
    const double largest = eig.eigenvalues(0);
    const double smallest = eig.eigenvalues(eig.eigenvalues.size() - 1);
    if (!(largest > 0.0) || !(smallest > kConditioningThreshold * largest)) {
        throw IllConditionedError(smallest, largest);
    }
    const Vector scale = eig.eigenvalues.cwiseSqrt().cwiseInverse();
    Matrix out = eig.eigenvectors * scale.asDiagonal() * eig.eigenvectors.transpose();
    return 0.5 * (out + out.transpose());
}

}  // namespace isokit

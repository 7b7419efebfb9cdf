#pragma once

// Linear softmax probe on frozen embeddings. Tracks how far the classifier
// weights drift from their initialization inside the top principal subspace
// of Cov(h), and how the logit variance splits across principal components.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "isokit/linalg.hpp"
#include "isokit/random.hpp"

namespace isokit {

class SoftmaxClassifier {
public:
    /// W_init ~ U(-1/sqrt(d), 1/sqrt(d)), drawn row-major from a seeded stream.
    SoftmaxClassifier(std::size_t dim, std::size_t n_classes, std::uint64_t seed)
        : init_(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n_classes)) {
        if (dim < 1) throw ContractError("classifier dimension must be positive");
        if (n_classes < 2) throw ContractError("classifier needs at least 2 classes");
        CounterRng rng(seed, 7);
        const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
        for (Eigen::Index i = 0; i < init_.rows(); ++i)
            for (Eigen::Index j = 0; j < init_.cols(); ++j) init_(i, j) = rng.uniform(-bound, bound);
        weights_ = init_;
    }

    const Matrix& weights() const noexcept { return weights_; }
    const Matrix& init_weights() const noexcept { return init_; }
    std::size_t n_classes() const noexcept { return static_cast<std::size_t>(init_.cols()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(init_.rows()); }

    /// Row-wise softmax of h W.
    Matrix probabilities(const Matrix& h) const {
        Matrix z = h * weights_;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            z.row(i).array() -= z.row(i).maxCoeff();
            z.row(i) = z.row(i).array().exp().matrix();
            z.row(i) /= z.row(i).sum();
        }
        return z;
    }

    /// Mean cross-entropy.
    double loss(const Matrix& h, const std::vector<int>& labels) const {
        const Matrix z = h * weights_;
        double total = 0.0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double m = z.row(i).maxCoeff();
            const double lse = m + std::log((z.row(i).array() - m).exp().sum());
            total += lse - z(i, labels[static_cast<std::size_t>(i)]);
        }
        return total / static_cast<double>(z.rows());
    }

    /// d loss / d W = h^T (P - Y) / N.
    Matrix gradient(const Matrix& h, const std::vector<int>& labels) const {
        Matrix p = probabilities(h);
        for (Eigen::Index i = 0; i < p.rows(); ++i) p(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
        return h.transpose() * p / static_cast<double>(h.rows());
    }

    void step(const Matrix& grad, double lr) { weights_ -= lr * grad; }

private:
    Matrix init_;
    Matrix weights_;
};

struct DriftMetrics {
    double cosine_sim = 1.0;
    double l2_dist = 0.0;
};

/// Compare W and W_init after projecting both onto span(basis): cosine and L2
/// distance of the flattened projected matrices. A zero projection has cosine
/// 1 against another zero projection and 0 against anything else.
inline DriftMetrics project_and_compare(const Matrix& w, const Matrix& w_init, const Matrix& basis) {
    if (w.rows() != w_init.rows() || w.cols() != w_init.cols() || basis.rows() != w.rows()) {
        throw DimensionMismatchError("weight and basis shapes disagree");
    }
    const Matrix gram = basis.transpose() * basis;
    if (max_abs(gram - Matrix::Identity(gram.rows(), gram.cols())) > 1e-8) {
        throw ContractError("projection basis is not orthonormal");
    }
    if (w == w_init) return {1.0, 0.0};
    const Matrix a = basis * (basis.transpose() * w);
    const Matrix b = basis * (basis.transpose() * w_init);
    DriftMetrics out;
    out.l2_dist = (a - b).norm();
    const double na = a.norm();
    const double nb = b.norm();
    if (na > 0.0 && nb > 0.0) {
        out.cosine_sim = std::clamp(a.cwiseProduct(b).sum() / (na * nb), -1.0, 1.0);
    } else {
        out.cosine_sim = (na == 0.0 && nb == 0.0) ? 1.0 : 0.0;
    }
    return out;
}

struct PCVarianceShare {
    Vector shares;  // aligned with the eigen-decomposition order

    /// Sum of the first k shares (k clipped to d).
    double cumulative(std::size_t k) const {
        const auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), shares.size());
        return shares.head(n).sum();
    }
};

/// Var_i = w_i * ||W^T v_i||^2, normalized to shares. Slightly negative
/// eigenvalues from rounding are treated as zero.
inline PCVarianceShare pc_variance_shares(const Matrix& w, const EigenDecomposition& eig) {
    if (eig.eigenvectors.rows() != w.rows()) throw DimensionMismatchError("eigenvectors do not match W rows");
    const Matrix proj = eig.eigenvectors.transpose() * w;  // row i = (W^T v_i)^T
    const Vector var = eig.eigenvalues.cwiseMax(0.0).cwiseProduct(proj.rowwise().squaredNorm());
    const double total = var.sum();
    if (!(total > 0.0)) {
        throw Error(ErrorKind::numerical, "undefined_shares", "logit variance is zero; shares are undefined");
    }
    return {var / total};
}

struct ProbeOptions {
    std::size_t steps = 500;
    double lr = 0.01;
    std::uint64_t seed = 0;
    std::size_t record_every = 0;  // 0 = about 50 records over the run
    std::size_t top_k = 10;        // dimension of the drift subspace
    double grad_tol = 1e-6;        // stop once ||grad||_F falls below this
    std::size_t n_classes = 0;     // 0 = max label + 1
};

struct ProbeRecord {
    std::size_t step = 0;
    DriftMetrics drift;
    double loss = 0.0;
    PCVarianceShare shares;
};

struct ProbeResult {
    SoftmaxClassifier classifier;
    std::vector<ProbeRecord> records;
    EigenDecomposition covariance_eig;  // of Cov(h)
};

/// Full-batch gradient descent on cross-entropy from a seeded initialization.
/// Step 0 and the final step are always recorded.
inline ProbeResult train_softmax(const EmbeddingMatrix& h, const std::vector<int>& labels,
                                 const ProbeOptions& opt) {
    if (labels.size() != h.n_samples()) {
        throw DimensionMismatchError("expected " + std::to_string(h.n_samples()) + " labels, got " +
                                     std::to_string(labels.size()));
    }
    if (!(opt.lr > 0.0) || !std::isfinite(opt.lr)) throw ContractError("learning rate must be positive");
    std::set<int> distinct;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) throw DataError("label_out_of_range", "negative class id", i);
        distinct.insert(labels[i]);
    }
    if (distinct.size() < 2) throw DataError("single_class", "labels contain a single class");
    const auto n_classes = opt.n_classes > 0 ? opt.n_classes : static_cast<std::size_t>(*distinct.rbegin()) + 1;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (static_cast<std::size_t>(labels[i]) >= n_classes) {
            throw DataError("label_out_of_range", "class id " + std::to_string(labels[i]) + " >= n_classes", i);
        }
    }
    if (h.n_samples() < n_classes) throw DataError("too_few_samples", "need at least one sample per class id");

    const Matrix& x = h.values();
    ProbeResult result{SoftmaxClassifier(h.dim(), n_classes, opt.seed), {},
                       sym_eigendecompose(compute_moments(h).covariance)};
    const auto k = std::min<Eigen::Index>(static_cast<Eigen::Index>(opt.top_k), x.cols());
    const Matrix basis = result.covariance_eig.eigenvectors.leftCols(k);
    const std::size_t every = opt.record_every > 0 ? opt.record_every : std::max<std::size_t>(1, opt.steps / 50);

    auto& clf = result.classifier;
    auto record = [&](std::size_t step) {
        ProbeRecord r;
        r.step = step;
        r.drift = project_and_compare(clf.weights(), clf.init_weights(), basis);
        r.loss = clf.loss(x, labels);
        r.shares = pc_variance_shares(clf.weights(), result.covariance_eig);
        result.records.push_back(std::move(r));
    };

    record(0);
    for (std::size_t step = 1; step <= opt.steps; ++step) {
        const Matrix grad = clf.gradient(x, labels);
        clf.step(grad, opt.lr);
        const bool converged = grad.norm() < opt.grad_tol;
        if (step % every == 0 || step == opt.steps || converged) record(step);
        if (converged) break;
    }
    return result;
}

}  // namespace isokit

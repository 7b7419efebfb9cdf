#include <gtest/gtest.h>

#include "isokit/probe.hpp"
#include "isokit/report.hpp"
#include "isokit/synthgen.hpp"
#include "support/oracles.hpp"

using namespace isokit;
using namespace isokit::testing;

namespace {

// Sample whose covariance is exactly V diag(w) V^T: centre, whiten to I, then rotate and scale.
Matrix exact_covariance_sample(std::size_t n, const Matrix& v, const Vector& w, std::uint64_t seed) {
    Matrix x = gaussian_matrix(n, static_cast<std::size_t>(w.size()), seed);
    x = x.rowwise() - x.colwise().mean();
    const Matrix cov = x.transpose() * x / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    const Matrix isqrt = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                         es.eigenvectors().transpose();
    return x * isqrt * w.cwiseSqrt().asDiagonal() * v.transpose();
}

// Share of logit variance along each v_i, measured directly from the data.
Vector empirical_shares(const Matrix& x, const Matrix& weights, const Matrix& v) {
    const Matrix xc = x.rowwise() - x.colwise().mean();
    Vector var(v.cols());
    for (Eigen::Index i = 0; i < v.cols(); ++i) {
        const Matrix logits = (xc * v.col(i)) * (v.col(i).transpose() * weights);
        var(i) = logits.squaredNorm() / static_cast<double>(x.rows());
    }
    return var / var.sum();
}

SyntheticSpec dominant_pc_spec() {
    SyntheticSpec s;
    s.n_samples = 2048;
    s.dim = 16;
    s.std_profile.assign(16, 1.0);
    s.std_profile[0] = 12.0;
    std::vector<double> axis(16, 0.0);
    axis[0] = 1.0;
    s.label_axis = axis;
    s.label_noise = 0.05;
    s.seed = 3;
    return s;
}

}  // namespace

TEST(SoftmaxClassifier, InitWithinBoundAndSeeded) {
    const SoftmaxClassifier a(25, 3, 11), b(25, 3, 11), c(25, 3, 12);
    EXPECT_LE(a.init_weights().cwiseAbs().maxCoeff(), 0.2);
    EXPECT_TRUE(bitwise_equal(a.init_weights(), b.init_weights()));
    EXPECT_FALSE(bitwise_equal(a.init_weights(), c.init_weights()));
    EXPECT_THROW(SoftmaxClassifier(4, 1, 0), ContractError);
}

TEST(SoftmaxClassifier, GradientMatchesFiniteDifference) {
    const Matrix h = gaussian_matrix(30, 4, 2);
    std::vector<int> y(30);
    for (int i = 0; i < 30; ++i) y[static_cast<std::size_t>(i)] = i % 3;
    SoftmaxClassifier clf(4, 3, 5);
    const Matrix g = clf.gradient(h, y);
    const double eps = 1e-6;
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) {
            Matrix d = Matrix::Zero(4, 3);
            d(i, j) = eps;
            SoftmaxClassifier plus = clf, minus = clf;
            plus.step(-d / 1.0, 1.0);
            minus.step(d, 1.0);
            const double fd = (plus.loss(h, y) - minus.loss(h, y)) / (2 * eps);
            EXPECT_NEAR(g(i, j), fd, 1e-7);
        }
    const Matrix p = clf.probabilities(h);
    EXPECT_LT((p.rowwise().sum() - Vector::Ones(30)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TrainSoftmax, ZeroStepsLeavesInitialWeights) {
    const EmbeddingMatrix h(gaussian_matrix(40, 6, 1));
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) y[i] = static_cast<int>(i % 2);
    ProbeOptions opt;
    opt.steps = 0;
    const ProbeResult r = train_softmax(h, y, opt);
    EXPECT_TRUE(bitwise_equal(r.classifier.weights(), r.classifier.init_weights()));
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].drift.cosine_sim, 1.0);
    EXPECT_EQ(r.records[0].drift.l2_dist, 0.0);
}

TEST(TrainSoftmax, SeparableLossDecreasesAndIsDeterministic) {
    Matrix x = gaussian_matrix(200, 5, 4);
    std::vector<int> y(200);
    for (Eigen::Index i = 0; i < 200; ++i) {
        y[static_cast<std::size_t>(i)] = x(i, 1) > 0 ? 1 : 0;
        x(i, 1) += x(i, 1) > 0 ? 1.0 : -1.0;
    }
    ProbeOptions opt;
    opt.steps = 200;
    opt.lr = 0.1;
    opt.record_every = 1;
    const ProbeResult r = train_softmax(EmbeddingMatrix(x), y, opt);
    ASSERT_EQ(r.records.size(), 201u);
    for (std::size_t i = 1; i < r.records.size(); ++i) EXPECT_LT(r.records[i].loss, r.records[i - 1].loss);
    EXPECT_EQ(r.records[0].drift.cosine_sim, 1.0);
    EXPECT_GT(r.records.back().drift.l2_dist, 0.0);

    const ProbeResult again = train_softmax(EmbeddingMatrix(x), y, opt);
    EXPECT_TRUE(bitwise_equal(r.classifier.weights(), again.classifier.weights()));
}

TEST(TrainSoftmax, RecordSchedule) {
    const EmbeddingMatrix h(gaussian_matrix(50, 3, 6));
    std::vector<int> y(50);
    for (std::size_t i = 0; i < 50; ++i) y[i] = static_cast<int>(i % 2);
    ProbeOptions opt;
    opt.steps = 25;
    opt.record_every = 10;
    opt.grad_tol = 0.0;
    const ProbeResult r = train_softmax(h, y, opt);
    std::vector<std::size_t> steps;
    for (const auto& rec : r.records) steps.push_back(rec.step);
    EXPECT_EQ(steps, (std::vector<std::size_t>{0, 10, 20, 25}));
}

TEST(ProjectAndCompare, Identities) {
    const SoftmaxClassifier clf(8, 3, 1);
    const Matrix& w0 = clf.init_weights();
    const Matrix basis = random_orthonormal(8, 4, 2);
    DriftMetrics m = project_and_compare(w0, w0, basis);
    EXPECT_EQ(m.cosine_sim, 1.0);
    EXPECT_EQ(m.l2_dist, 0.0);

    m = project_and_compare(2.0 * w0, w0, basis);
    const double proj_norm = (basis.transpose() * w0).norm();
    EXPECT_NEAR(m.cosine_sim, 1.0, 1e-12);
    EXPECT_NEAR(m.l2_dist, proj_norm, 1e-12);

    m = project_and_compare(-w0, w0, basis);
    EXPECT_NEAR(m.cosine_sim, -1.0, 1e-12);
}

TEST(ProjectAndCompare, MatchesExplicitProjector) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix basis = random_orthonormal(10, 3, seed);
        const Matrix w = gaussian_matrix(10, 4, seed + 10);
        const Matrix w0 = gaussian_matrix(10, 4, seed + 20);
        Matrix p = Matrix::Zero(10, 10);  // P = sum_k b_k b_k^T
        for (Eigen::Index k = 0; k < 3; ++k) p += basis.col(k) * basis.col(k).transpose();
        const Matrix a = p * w, b = p * w0;
        double dot = 0, na = 0, nb = 0, dist = 0;
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            dot += a.data()[i] * b.data()[i];
            na += a.data()[i] * a.data()[i];
            nb += b.data()[i] * b.data()[i];
            dist += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
        }
        const DriftMetrics m = project_and_compare(w, w0, basis);
        EXPECT_NEAR(m.cosine_sim, dot / std::sqrt(na * nb), 1e-12);
        EXPECT_NEAR(m.l2_dist, std::sqrt(dist), 1e-12);
    }
}

TEST(ProjectAndCompare, RejectsBadBasis) {
    const Matrix w = Matrix::Ones(4, 2);
    EXPECT_THROW(project_and_compare(w, w, 2.0 * Matrix::Identity(4, 2)), ContractError);
    EXPECT_THROW(project_and_compare(w, Matrix::Ones(3, 2), Matrix::Identity(4, 2)), DimensionMismatchError);
}

TEST(PCVarianceShares, HandExamples) {
    EigenDecomposition eig{Vector::Ones(3), Matrix::Identity(3, 3)};
    Matrix w = Matrix::Zero(3, 2);
    w(0, 0) = 1.0;
    Vector s = pc_variance_shares(w, eig).shares;
    EXPECT_EQ(s, (Vector(3) << 1, 0, 0).finished());

    eig.eigenvalues << 4, 1, 0;
    w.setOnes();
    s = pc_variance_shares(w, eig).shares;
    EXPECT_NEAR(s(0), 0.8, 1e-15);
    EXPECT_NEAR(s(1), 0.2, 1e-15);
    EXPECT_EQ(s(2), 0.0);
    EXPECT_NEAR(pc_variance_shares(w, eig).cumulative(5), 1.0, 1e-15);

    EXPECT_THROW(pc_variance_shares(Matrix::Zero(3, 2), eig), Error);
}

TEST(PCVarianceShares, MatchesEmpiricalLogitVariance) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const std::size_t d = 6;
        const Matrix v = random_orthonormal(d, d, seed + 100);
        Vector w(6);
        w << 9.0, 4.0, 2.5, 1.0, 0.5, 0.1;
        const Matrix x = exact_covariance_sample(300, v, w, seed);
        const Matrix weights = gaussian_matrix(d, 3, seed + 200);
        const EigenDecomposition eig = sym_eigendecompose(compute_moments(EmbeddingMatrix(x)).covariance);
        const Vector got = pc_variance_shares(weights, eig).shares;
        const Vector expected = empirical_shares(x, weights, v);
        for (Eigen::Index i = 0; i < 6; ++i) EXPECT_NEAR(got(i), expected(i), 1e-6) << "seed " << seed;
    }
}

TEST(PCVarianceShares, InvariantToSignAndScale) {
    const Matrix cov = random_spd(7, 4);
    EigenDecomposition eig = sym_eigendecompose(cov);
    const Matrix w = gaussian_matrix(7, 2, 5);
    const Vector base = pc_variance_shares(w, eig).shares;
    EigenDecomposition flipped = eig;
    flipped.eigenvectors.col(0) *= -1.0;
    flipped.eigenvectors.col(3) *= -1.0;
    EXPECT_LT((pc_variance_shares(w, flipped).shares - base).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((pc_variance_shares(37.0 * w, eig).shares - base).cwiseAbs().maxCoeff(), 1e-12);
    EigenDecomposition scaled = eig;
    scaled.eigenvalues *= 1e-3;
    EXPECT_LT((pc_variance_shares(w, scaled).shares - base).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TrainSoftmax, DominantComponentAndIsoBN) {
    const SyntheticData data = generate(dominant_pc_spec());
    std::vector<int> labels = *data.labels;
    ProbeOptions opt;
    opt.steps = 1000;
    opt.lr = 0.01;
    const ProbeResult raw = train_softmax(data.embeddings, labels, opt);
    const double raw_top1 = raw.records.back().shares.cumulative(1);
    EXPECT_GE(raw_top1, 0.9);

    const ProbeResult iso = train_softmax(isobn_full_batch(data.embeddings, IsoBNConfig{}), labels, opt);
    EXPECT_LT(iso.records.back().shares.cumulative(1), raw_top1);
}

TEST(TrainSoftmax, LabelValidation) {
    const EmbeddingMatrix h(gaussian_matrix(6, 2, 1));
    ProbeOptions opt;
    EXPECT_THROW(train_softmax(h, {0, 1, 0, 1, -1, 0}, opt), DataError);
    EXPECT_THROW(train_softmax(h, {1, 1, 1, 1, 1, 1}, opt), DataError);
    EXPECT_THROW(train_softmax(h, {0, 1, 0}, opt), DimensionMismatchError);
    opt.n_classes = 2;
    try {
        train_softmax(h, {0, 1, 2, 1, 0, 0}, opt);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.code(), "label_out_of_range");
    }
    opt.lr = -1.0;
    EXPECT_THROW(train_softmax(h, {0, 1, 0, 1, 0, 1}, opt), ContractError);
}

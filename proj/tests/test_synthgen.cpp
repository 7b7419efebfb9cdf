#include <gtest/gtest.h>

#include "isokit/normalizers.hpp"
#include "isokit/synthgen.hpp"
#include "support/oracles.hpp"

using namespace isokit;
using namespace isokit::testing;

namespace {

SyntheticSpec base_spec() {
    SyntheticSpec s;
    s.n_samples = 4096;
    s.dim = 8;
    s.seed = 1;
    return s;
}

}  // namespace

TEST(Synthgen, IdentityIsNearlyUncorrelated) {
    const Matrix rho = compute_moments(generate(base_spec()).embeddings).correlation;
    const Matrix off = rho - Matrix::Identity(8, 8);
    EXPECT_LE(off.cwiseAbs().maxCoeff(), 0.1);
}

TEST(Synthgen, PerfectCorrelationGivesExactGroups) {
    SyntheticSpec s = base_spec();
    s.n_samples = 256;
    s.dim = 4;
    s.group_sizes = {2, 2};
    s.within_group_corr = 1.0;
    const Matrix rho = compute_moments(generate(s).embeddings).correlation;
    EXPECT_NEAR(rho(0, 1), 1.0, 1e-12);
    EXPECT_NEAR(rho(2, 3), 1.0, 1e-12);
    // cross-group correlation is whatever the two factors share by chance
    Vector expected(4);
    const double c2 = rho(0, 2) * rho(0, 2);
    expected << 2 + 2 * c2, 2 + 2 * c2, 2 + 2 * c2, 2 + 2 * c2;
    EXPECT_LT((compute_gamma(rho).gamma - expected).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(std::abs(rho(0, 2)), 0.2);
}

TEST(Synthgen, Deterministic) {
    SyntheticSpec s = base_spec();
    s.group_sizes = {3};
    s.within_group_corr = 0.5;
    s.label_axis = std::vector<double>(8, 1.0);
    s.label_noise = 0.1;
    const SyntheticData a = generate(s), b = generate(s);
    EXPECT_TRUE(bitwise_equal(a.embeddings.values(), b.embeddings.values()));
    EXPECT_EQ(*a.labels, *b.labels);
    s.seed = 2;
    EXPECT_FALSE(bitwise_equal(a.embeddings.values(), generate(s).embeddings.values()));
}

TEST(Synthgen, MatchesTargetMoments) {
    SyntheticSpec s = base_spec();
    s.n_samples = 8192;
    s.dim = 10;
    s.group_sizes = {4, 3};
    s.group_offset = 2;
    s.within_group_corr = 0.8;
    for (std::size_t j = 0; j < 10; ++j) s.std_profile.push_back(3.0 * std::pow(0.7, j));
    const MomentEstimates m = compute_moments(generate(s).embeddings);
    const Matrix target = s.target_covariance();
    const Vector tstd = target.diagonal().cwiseSqrt();
    for (Eigen::Index i = 0; i < 10; ++i) {
        EXPECT_NEAR(m.std(i) / tstd(i), 1.0, 0.05) << i;
        for (Eigen::Index j = 0; j < 10; ++j)
            EXPECT_NEAR(m.correlation(i, j), target(i, j) / (tstd(i) * tstd(j)), 0.08) << i << "," << j;
    }
    // group layout: dims 2..5 and 6..8 correlated, 0,1,9 independent
    EXPECT_NEAR(target(2, 5) / (tstd(2) * tstd(5)), 0.8, 1e-12);
    EXPECT_EQ(target(1, 2), 0.0);
    EXPECT_EQ(target(5, 6), 0.0);
    EXPECT_EQ(target(8, 9), 0.0);
}

TEST(Synthgen, LabelsFollowAxisWithNoise) {
    SyntheticSpec s = base_spec();
    std::vector<double> axis(8, 0.0);
    axis[2] = 1.0;
    s.label_axis = axis;
    const SyntheticData clean = generate(s);
    ASSERT_TRUE(clean.labels.has_value());
    for (std::size_t i = 0; i < s.n_samples; ++i)
        EXPECT_EQ((*clean.labels)[i], clean.embeddings(i, 2) > 0 ? 1 : 0);

    s.label_noise = 0.2;
    const SyntheticData noisy = generate(s);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < s.n_samples; ++i) flips += (*noisy.labels)[i] != (*clean.labels)[i];
    EXPECT_NEAR(static_cast<double>(flips) / s.n_samples, 0.2, 0.03);
    EXPECT_FALSE(generate(base_spec()).labels.has_value());
}

TEST(Synthgen, ValidationErrors) {
    auto expect_invalid = [](SyntheticSpec s) {
        try {
            s.validate();
            FAIL() << "accepted invalid spec";
        } catch (const DataError& e) {
            EXPECT_EQ(e.code(), "invalid_spec");
        }
    };
    SyntheticSpec s = base_spec();
    s.n_samples = 0;
    expect_invalid(s);
    s = base_spec();
    s.group_sizes = {5, 4};
    expect_invalid(s);
    s = base_spec();
    s.within_group_corr = 1.5;
    s.group_sizes = {2};
    expect_invalid(s);
    s = base_spec();
    s.std_profile = {1.0, 2.0};
    expect_invalid(s);
    s = base_spec();
    s.std_profile.assign(8, 1.0);
    s.std_profile[3] = 0.0;
    expect_invalid(s);
    s = base_spec();
    s.label_axis = std::vector<double>(3, 1.0);
    expect_invalid(s);
    s = base_spec();
    s.label_noise = 0.7;
    expect_invalid(s);
}

#include <gtest/gtest.h>

#include "fusednet/rng.hpp"
#include "fusednet/solver/cv.hpp"
#include "fusednet/solver/serialize.hpp"
#include "test_util.hpp"

using namespace fusednet;

namespace {

GroupedDesign shared_design(Rng& rng, int n, const Eigen::MatrixXd& beta, double noise) {
    return testutil::grouped_design(rng, n, beta, noise);
}

}  // namespace

TEST(Grids, LambdaGridShape) {
    const auto g = lambda_grid(10.0, 50, 1e-3);
    ASSERT_EQ(g.size(), 50u);
    EXPECT_DOUBLE_EQ(g.front(), 10.0);
    EXPECT_NEAR(g.back(), 1e-2, 1e-15);
    for (std::size_t i = 1; i < g.size(); ++i) {
        EXPECT_LT(g[i], g[i - 1]);
        EXPECT_NEAR(g[i] / g[i - 1], g[1] / g[0], 1e-12);
    }
    EXPECT_EQ(lambda_grid(0.0, 50, 1e-3), std::vector<double>{0.0});
    EXPECT_EQ(lambda_grid(3.0, 1, 1e-3), std::vector<double>{3.0});
    EXPECT_THROW(lambda_grid(1.0, 0, 1e-3), ConfigError);
}

TEST(Grids, GammaGridShape) {
    const auto g = gamma_grid(2.0, 10, 1e-2, 1e2);
    ASSERT_EQ(g.size(), 10u);
    EXPECT_NEAR(g.front(), 2e-2, 1e-15);
    EXPECT_NEAR(g.back(), 2e2, 1e-12);
    EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
}

TEST(CvLasso, SinglePointGridEqualsFitLasso) {
    Rng rng(1);
    const auto d = shared_design(rng, 30, (Eigen::MatrixXd(4, 1) << 1, 0, -0.5, 0).finished(), 0.5);
    const auto cv = cv_lasso(d, std::vector<double>{4.0}, 5, 9);
    const auto direct = fit_lasso(d.predictors, d.response, 4.0);
    EXPECT_EQ(cv.fit.beta, direct.beta);
    EXPECT_EQ(cv.selected, 0u);
    EXPECT_EQ(cv.cv_mse.size(), 1u);
}

TEST(CvLasso, DeterministicGivenSeed) {
    Rng rng(2);
    const auto d = shared_design(rng, 25, (Eigen::MatrixXd(5, 1) << 0.6, 0, 0, -0.6, 0).finished(), 1.0);
    CvOptions o;
    const auto a = cv_lasso(d, o, 5);
    const auto b = cv_lasso(d, o, 5);
    EXPECT_EQ(a.selected, b.selected);
    EXPECT_EQ(a.cv_mse, b.cv_mse);
    EXPECT_EQ(fitio::to_text(a.fit), fitio::to_text(b.fit));
}

TEST(CvLasso, FallsBackToLeaveOneOut) {
    Rng rng(3);
    const auto d = shared_design(rng, 3, (Eigen::MatrixXd(2, 1) << 1, 0).finished(), 0.5);
    const auto cv = cv_lasso(d, lambda_grid(LassoProblem(d).lambda_max(), 5, 1e-2), 5, 1);
    EXPECT_EQ(cv.cv_mse.size(), 5u);
    for (double v : cv.cv_mse) EXPECT_TRUE(std::isfinite(v));
}

TEST(CvLasso, RejectsDegenerateInput) {
    Rng rng(4);
    const auto one = shared_design(rng, 1, (Eigen::MatrixXd(2, 1) << 1, 0).finished(), 0.5);
    EXPECT_THROW(cv_lasso(one, std::vector<double>{1.0}, 5, 1), DataError);
    const auto d = shared_design(rng, 10, (Eigen::MatrixXd(2, 1) << 1, 0).finished(), 0.5);
    EXPECT_THROW(cv_lasso(d, std::vector<double>{1.0}, 1, 1), ConfigError);
    EXPECT_THROW(cv_lasso(d, std::vector<double>{1.0, 2.0}, 5, 1), ConfigError);
    EXPECT_THROW(cv_lasso(d, std::vector<double>{}, 5, 1), ConfigError);
}

TEST(CvLasso, PureNoiseSelectsNearNullModel) {
    CvOptions o;
    int near_null = 0;
    const int replicates = 50;
    for (int r = 0; r < replicates; ++r) {
        Rng rng(derive_seed(100, "noise", static_cast<std::uint64_t>(r)));
        GroupedDesign d = shared_design(rng, 40, Eigen::MatrixXd::Zero(5, 1), 1.0);
        const auto cv = cv_lasso(d, o, static_cast<std::uint64_t>(r));
        if (cv.selected < static_cast<std::size_t>(o.lambda_count / 10)) ++near_null;
    }
    EXPECT_GE(near_null, 45) << near_null << " of " << replicates;
}

TEST(CvFused, UnitGridsEqualFitFused) {
    Rng rng(5);
    const auto d = shared_design(rng, 12, (Eigen::MatrixXd(3, 2) << 1, 0.5, 0, 0, -1, -1).finished(), 0.5);
    const auto w = uniform_weights(2);
    const auto cv = cv_fused(d, std::vector<double>{2.0}, std::vector<double>{3.0}, w, 4, 8);
    const auto direct = fit_fused(d, 2.0, 3.0, w);
    EXPECT_EQ(fitio::to_text(cv.fit), fitio::to_text(direct));
}

TEST(CvFused, DeterministicGivenSeed) {
    Rng rng(6);
    const auto d = shared_design(rng, 10, (Eigen::MatrixXd(3, 2) << 1, 0.5, 0, 0, -1, -1).finished(), 0.5);
    CvOptions o;
    o.lambda_count = 8;
    o.gamma_count = 4;
    const auto a = cv_fused(d, uniform_weights(2), o, 3);
    const auto b = cv_fused(d, uniform_weights(2), o, 3);
    EXPECT_EQ(a.cv_mse, b.cv_mse);
    EXPECT_EQ(fitio::to_text(a.fit), fitio::to_text(b.fit));
}

TEST(CvFused, EveryHabitatInEveryInnerFold) {
    std::vector<int> group;
    for (int s = 0; s < 3; ++s)
        for (int i = 0; i < 7; ++i) group.push_back(s);
    const auto label = detail::stratified_folds(group, 3, 5, 42);
    for (int s = 0; s < 3; ++s)
        for (int k = 0; k < 5; ++k) {
            bool seen = false;
            for (std::size_t i = 0; i < group.size(); ++i) seen |= group[i] == s && label[i] == k;
            EXPECT_TRUE(seen) << "habitat " << s << " fold " << k;
        }
}

TEST(CvFused, RejectsHabitatWithOneRow) {
    Rng rng(7);
    auto d = shared_design(rng, 5, (Eigen::MatrixXd(2, 2) << 1, 1, 0, 0).finished(), 0.5);
    d = d.subset({0, 1, 2, 3, 4, 5});
    EXPECT_THROW(cv_fused(d, std::vector<double>{1.0}, std::vector<double>{1.0}, uniform_weights(2), 5, 1), DataError);
}

namespace {

/// Count of replicates whose selected gamma sits in the upper half of the grid.
int upper_half_count(const Eigen::MatrixXd& beta, int replicates, std::uint64_t base) {
    CvOptions o;
    int upper = 0;
    for (int r = 0; r < replicates; ++r) {
        Rng rng(derive_seed(base, "fusion", static_cast<std::uint64_t>(r)));
        const auto d = testutil::grouped_design(rng, 30, beta, 1.0);
        const auto cv = cv_fused(d, uniform_weights(static_cast<int>(beta.cols())), o, static_cast<std::uint64_t>(r));
        if (cv.gamma_index >= static_cast<std::size_t>(o.gamma_count / 2)) ++upper;
    }
    return upper;
}

}  // namespace

TEST(CvFused, SharedCoefficientsFavourLargeGamma) {
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(6, 2);
    beta.row(0).setConstant(0.8);
    beta.row(1).setConstant(-0.6);
    const int upper = upper_half_count(beta, 50, 200);
    EXPECT_GE(upper, 40) << upper << " of 50";
}

TEST(CvFused, DisjointCoefficientsFavourSmallGamma) {
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(6, 2);
    beta(0, 0) = 0.8;
    beta(1, 0) = -0.6;
    beta(2, 1) = 0.8;
    beta(3, 1) = -0.6;
    const int upper = upper_half_count(beta, 50, 300);
    EXPECT_LE(upper, 10) << (50 - upper) << " of 50 in the lower half";
}

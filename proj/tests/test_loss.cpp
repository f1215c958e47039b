#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "penex/loss.hpp"
#include "penex/quadrature.hpp"
#include "penex/solver.hpp"

using namespace penex;

TEST(Loss, Constants)
{
    const LossConstants sq = loss_constants(LossKind::squared);
    EXPECT_EQ(sq.b, 0.0);
    EXPECT_EQ(sq.b2_sharp, 1.0);
    const LossConstants lg = loss_constants(LossKind::logistic);
    EXPECT_NEAR(lg.b, 1.0 / (6.0 * std::sqrt(3.0)), 1e-16);
    EXPECT_EQ(lg.b2_sharp, 0.25);
    EXPECT_EQ(lg.b2_reported, 1.0);
}

TEST(Loss, LogisticPointValues)
{
    EXPECT_DOUBLE_EQ(loss_d2(LossKind::logistic, 1.0, 0.0), 0.25);
    EXPECT_DOUBLE_EQ(loss_d1(LossKind::logistic, 1.0, 0.0), 0.5);
    EXPECT_DOUBLE_EQ(loss_d1(LossKind::squared, 1.0, 3.0), 2.0);
    EXPECT_THROW(loss_value(LossKind::logistic, 0.5, 0.0), std::invalid_argument);
    // convex form is finite for extreme arguments
    EXPECT_DOUBLE_EQ(loss_value(LossKind::logistic, 1.0, 800.0), 800.0);
    EXPECT_DOUBLE_EQ(loss_value(LossKind::logistic, 0.0, 40.0), std::log1p(std::exp(-40.0)));
    EXPECT_DOUBLE_EQ(loss_value(LossKind::logistic, 1.0, -40.0), std::log1p(std::exp(-40.0)));
    EXPECT_NEAR(log1p_exp(-800.0), 0.0, 1e-300);
}

TEST(Loss, DerivativesMatchFiniteDifferences)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-6.0, 6.0);
    for (int i = 0; i < 1000; ++i) {
        const double u = unif(rng);
        for (LossKind kind : {LossKind::squared, LossKind::logistic}) {
            const double y = kind == LossKind::logistic ? static_cast<double>(i % 2) : unif(rng);
            const double d1 = oracle::central_difference([&](double v) { return loss_value(kind, y, v); }, u);
            const double d2 = oracle::central_difference([&](double v) { return loss_d1(kind, y, v); }, u);
            const double d3 = oracle::central_difference([&](double v) { return loss_d2(kind, y, v); }, u);
            EXPECT_NEAR(loss_d1(kind, y, u), d1, 1e-5 * std::max(1.0, std::abs(d1)));
            EXPECT_NEAR(loss_d2(kind, y, u), d2, 1e-5 * std::max(1.0, std::abs(d2)));
            EXPECT_NEAR(loss_d3(kind, y, u), d3, 1e-5 * std::max(1.0, std::abs(d3)));
        }
    }
}

TEST(Loss, LipschitzConstantOfSecondDerivativeByGridSearch)
{
    double best = 0.0, arg = 0.0;
    for (double u = -10.0; u <= 10.0; u += 1e-4) {
        const double v = std::abs(oracle::central_difference([](double t) { return loss_d2(LossKind::logistic, 0, t); },
                                                             u, 1e-4));
        if (v > best) best = v, arg = u;
    }
    EXPECT_NEAR(best, 1.0 / (6.0 * std::sqrt(3.0)), 1e-6);
    EXPECT_NEAR(std::abs(arg), std::log(2.0 + std::sqrt(3.0)), 1e-3);
}

TEST(Quadrature, GaussHermiteMoments)
{
    const GaussRule r = gauss_hermite_normal(64);
    double s0 = 0, s2 = 0, s4 = 0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        const double x = r.nodes[i], w = r.weights[i];
        s0 += w, s2 += w * x * x, s4 += w * x * x * x * x;
    }
    EXPECT_NEAR(s0, 1.0, 1e-13);
    EXPECT_NEAR(s2, 1.0, 1e-12);
    EXPECT_NEAR(s4, 3.0, 1e-11);
    EXPECT_NEAR(normal_expectation([](double x) { return std::cos(x); }), std::exp(-0.5), 1e-13);
    EXPECT_NEAR(integrate([](double x) { return std::exp(-x * x); }, -INFINITY, INFINITY), std::sqrt(M_PI), 1e-12);
}

TEST(Curvature, ZeroSignalAndSquaredLoss)
{
    const CovarianceModel cov = CovarianceModel::ar1(4, 0.3);
    const CurvatureMatrix k0 = curvature_matrix(LossKind::logistic, cov, VectorXd::Zero(4));
    EXPECT_LT((k0.k.dense() - 0.25 * cov.matrix().dense()).norm(), 1e-14);
    VectorXd b(4);
    b << 1, -2, 0, 0.5;
    const CurvatureMatrix ks = curvature_matrix(LossKind::squared, cov, b);
    EXPECT_EQ(ks.k.dense(), cov.matrix().dense());
    EXPECT_EQ(ks.provenance, CurvatureProvenance::exact_sigma);
    EXPECT_THROW(curvature_matrix(LossKind::logistic, cov, b, DesignKind::rademacher), std::invalid_argument);
}

TEST(Curvature, LogisticQuadratureMatchesIndependentMonteCarlo)
{
    const Index p = 3;
    const CovarianceModel cov = CovarianceModel::identity(p);
    VectorXd b = VectorXd::Zero(p);
    b(0) = 1.0;
    const CurvatureMatrix k = curvature_matrix(LossKind::logistic, cov, b);
    EXPECT_EQ(k.provenance, CurvatureProvenance::stein_quadrature);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    MatrixXd acc = MatrixXd::Zero(p, p);
    const int n = 1000000;
    VectorXd x(p);
    for (int i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) x(j) = normal(rng);
        const double e = std::exp(x.dot(b));
        acc.noalias() += (e / ((1.0 + e) * (1.0 + e))) * x * x.transpose();
    }
    acc /= n;
    const MatrixXd kd = k.k.dense();
    for (Index i = 0; i < p; ++i) {
        EXPECT_NEAR(acc(i, i), kd(i, i), 0.01 * kd(i, i));
        for (Index j = 0; j < p; ++j)
            if (i != j) EXPECT_NEAR(acc(i, j), kd(i, j), 0.01 * kd.diagonal().minCoeff());
    }

    const CurvatureMatrix kmc = curvature_matrix_mc(LossKind::logistic, cov, b, DesignKind::gaussian, 400000, 5);
    EXPECT_EQ(kmc.provenance, CurvatureProvenance::mc_estimate);
    EXPECT_LT((kmc.k.dense() - kd).cwiseAbs().maxCoeff(), 0.01 * kd.maxCoeff());
}

TEST(Curvature, B3Constant)
{
    const CovarianceModel cov = CovarianceModel::ar1(5, 0.4);
    EXPECT_NEAR(b3_constant(cov, curvature_matrix(LossKind::squared, cov, VectorXd::Zero(5))), 1.0, 1e-12);
    EXPECT_NEAR(b3_constant(cov, curvature_matrix(LossKind::logistic, cov, VectorXd::Zero(5))), 4.0, 1e-12);

    const CovarianceModel id = CovarianceModel::identity(6);
    VectorXd b = VectorXd::Zero(6);
    b(1) = 0.6;
    b(4) = -0.8;
    const CurvatureMatrix k = curvature_matrix(LossKind::logistic, id, b);
    const MatrixXd kinv = k.k.dense_inverse();
    // Sigma = I so K^{-1/2} Sigma K^{-1/2} has the spectrum of K^{-1}; power iteration on it
    const double oracle_value = power_iteration([&](const VectorXd& v) { return VectorXd(kinv * v); }, 6, 1e-15, 10000);
    const double b3 = b3_constant(id, k);
    EXPECT_GT(b3, 1.0);
    EXPECT_NEAR(b3, oracle_value, 1e-8);
}

TEST(Curvature, LowerBound)
{
    EXPECT_DOUBLE_EQ(curvature_lower_bound(LossKind::logistic, 0.0), 0.25);
    EXPECT_NEAR(curvature_lower_bound(LossKind::logistic, 2.0), std::exp(2.0) / std::pow(1.0 + std::exp(2.0), 2), 1e-15);
    EXPECT_NEAR(curvature_lower_bound(LossKind::logistic, 2.0), 0.10499, 1e-5);
    EXPECT_EQ(curvature_lower_bound(LossKind::squared, 7.0), 1.0);
}

TEST(Stability, LogisticGridAndTrivialCases)
{
    const StabilityReport r = stability_ratio_check(LossKind::logistic, StabilityGrid{});
    EXPECT_TRUE(r.holds());
    EXPECT_GT(r.pairs_checked, 1000000u);
    const StabilityReport sq = stability_ratio_check(LossKind::squared, {{1.0, 3.0}, {-2.0, 2.0}});
    // quotient is normalised by exp(3|s-t|); squared loss has l'' == 1
    EXPECT_DOUBLE_EQ(sq.worst_quotient, std::exp(-6.0));
    const StabilityReport same = stability_ratio_check(LossKind::logistic, {{0.7, 0.7}});
    EXPECT_DOUBLE_EQ(same.worst_quotient, 1.0);
}

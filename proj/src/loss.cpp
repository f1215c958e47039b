#include "penex/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "penex/quadrature.hpp"
#include "penex/rng.hpp"

namespace penex {

std::string to_string(LossKind kind) { return kind == LossKind::squared ? "squared" : "logistic"; }

LossKind parse_loss_kind(const std::string& s)
{
    if (s == "squared") return LossKind::squared;
    if (s == "logistic") return LossKind::logistic;
    throw std::invalid_argument("unknown loss kind '" + s + "'");
}

LossConstants loss_constants(LossKind kind)
{
    if (kind == LossKind::squared) return {0.0, 1.0, 1.0};
    return {1.0 / (6.0 * std::sqrt(3.0)), 0.25, 1.0};
}

namespace {

void check_label(LossKind kind, double y)
{
    if (kind == LossKind::logistic && y != 0.0 && y != 1.0)
        throw std::invalid_argument("logistic loss requires labels in {0, 1}");
}

// 1/(1+e^u)
double flipped_sigmoid(double u)
{
    if (u >= 0.0) {
        const double e = std::exp(-u);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(u));
}

// e^u/(1+e^u)^2, symmetric in u
double logistic_curvature(double u)
{
    const double e = std::exp(-std::abs(u));
    return e / ((1.0 + e) * (1.0 + e));
}

}  // namespace

double log1p_exp(double u) { return u <= 0.0 ? std::log1p(std::exp(u)) : u + std::log1p(std::exp(-u)); }

double loss_value(LossKind kind, double y, double u)
{
    check_label(kind, y);
    if (kind == LossKind::squared) return 0.5 * (y - u) * (y - u);
    // both forms are equal; pick the one without cancellation
    return u >= 0.0 ? y * u + log1p_exp(-u) : (y - 1.0) * u + log1p_exp(u);
}

double loss_d1(LossKind kind, double y, double u)
{
    check_label(kind, y);
    if (kind == LossKind::squared) return u - y;
    return y - flipped_sigmoid(u);
}

double loss_d2(LossKind kind, double y, double u)
{
    check_label(kind, y);
    if (kind == LossKind::squared) return 1.0;
    return logistic_curvature(u);
}

double loss_d3(LossKind kind, double y, double u)
{
    check_label(kind, y);
    if (kind == LossKind::squared) return 0.0;
    return -logistic_curvature(u) * std::tanh(0.5 * u);
}

std::string to_string(CurvatureProvenance p)
{
    switch (p) {
    case CurvatureProvenance::exact_sigma: return "exact-sigma";
    case CurvatureProvenance::stein_quadrature: return "stein-quadrature";
    case CurvatureProvenance::mc_estimate: return "mc-estimate";
    }
    return "unknown";
}

CurvatureMatrix curvature_matrix(LossKind kind, const CovarianceModel& cov, const VectorXd& beta_star,
                                 DesignKind design)
{
    if (beta_star.size() != cov.dim()) throw std::invalid_argument("curvature_matrix: dimension mismatch");
    if (kind == LossKind::squared) return {cov.matrix(), CurvatureProvenance::exact_sigma};
    if (design != DesignKind::gaussian)
        throw std::invalid_argument(
            "curvature_matrix: the quadrature path needs a Gaussian design; use curvature_matrix_mc");

    const SpdMatrix& sigma = cov.matrix();
    const double v2 = sigma.quad_form(beta_star);
    if (v2 == 0.0) {
        if (sigma.is_scaled_identity())
            return {SpdMatrix::scaled_identity(sigma.dim(), 0.25 * sigma.scale()),
                    CurvatureProvenance::stein_quadrature};
        return {SpdMatrix::from_dense(0.25 * sigma.dense()), CurvatureProvenance::stein_quadrature};
    }
    const double v = std::sqrt(v2);
    const double m0 = normal_expectation([v](double x) { return logistic_curvature(v * x); });
    const double m2 = normal_expectation([v](double x) { return logistic_curvature(v * x) * v * v * x * x; });
    const VectorXd w = sigma.apply(beta_star);
    MatrixXd k = m0 * sigma.dense();
    k.noalias() += ((m2 / v2 - m0) / v2) * (w * w.transpose());
    return {SpdMatrix::from_dense(k), CurvatureProvenance::stein_quadrature};
}

CurvatureMatrix curvature_matrix_mc(LossKind kind, const CovarianceModel& cov, const VectorXd& beta_star,
                                    DesignKind design, Index num_samples, std::uint64_t seed)
{
    if (beta_star.size() != cov.dim()) throw std::invalid_argument("curvature_matrix_mc: dimension mismatch");
    if (num_samples < 1) throw std::invalid_argument("curvature_matrix_mc: need at least one sample");
    const Index p = cov.dim();
    const Index chunk = 100000;
    MatrixXd acc = MatrixXd::Zero(p, p);
    const std::uint64_t mc_seed = derive_seed(seed, static_cast<std::uint64_t>(Stream::curvature_mc));
    for (Index start = 0, c = 0; start < num_samples; start += chunk, ++c) {
        const Index rows = std::min(chunk, num_samples - start);
        const MatrixXd x = generate_design(cov, rows, design, derive_seed(mc_seed, static_cast<std::uint64_t>(c)));
        VectorXd w(rows);
        const VectorXd t = x * beta_star;
        for (Index i = 0; i < rows; ++i) w(i) = kind == LossKind::squared ? 1.0 : logistic_curvature(t(i));
        acc.noalias() += x.transpose() * w.asDiagonal() * x;
    }
    acc /= static_cast<double>(num_samples);
    return {SpdMatrix::from_dense(0.5 * (acc + acc.transpose())), CurvatureProvenance::mc_estimate};
}

double b3_constant(const CovarianceModel& cov, const CurvatureMatrix& k)
{
    const SpdMatrix& sigma = cov.matrix();
    if (sigma.dim() != k.dim()) throw std::invalid_argument("b3_constant: dimension mismatch");
    if (k.k.is_scaled_identity()) return sigma.lambda_max() / k.k.scale();
    const MatrixXd kis = k.k.dense_sqrt().inverse();
    const MatrixXd m = kis * sigma.dense() * kis;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(m.rows() - 1);
}

double curvature_lower_bound(LossKind kind, double tau)
{
    if (!(tau >= 0.0)) throw std::invalid_argument("curvature_lower_bound: tau must be >= 0");
    if (kind == LossKind::squared) return 1.0;
    return logistic_curvature(tau);
}

namespace {

void update_stability(LossKind kind, double s, double t, StabilityReport& report)
{
    const double ratio = loss_d2(kind, 0.0, s) / loss_d2(kind, 0.0, t);
    const double quotient = ratio / std::exp(3.0 * std::abs(s - t));
    if (report.pairs_checked == 0 || quotient > report.worst_quotient) {
        report.worst_quotient = quotient;
        report.worst_s = s;
        report.worst_t = t;
    }
    ++report.pairs_checked;
}

}  // namespace

StabilityReport stability_ratio_check(LossKind kind, const StabilityGrid& grid)
{
    if (!(grid.step > 0.0) || grid.hi < grid.lo) throw std::invalid_argument("stability grid is empty");
    const auto count = static_cast<long>(std::floor((grid.hi - grid.lo) / grid.step + 1e-9)) + 1;
    StabilityReport report;
    for (long a = 0; a < count; ++a) {
        const double s = grid.lo + static_cast<double>(a) * grid.step;
        for (long b = 0; b < count; ++b) {
            const double t = grid.lo + static_cast<double>(b) * grid.step;
            if (std::abs(s - t) > grid.max_gap + 1e-12) continue;
            update_stability(kind, s, t, report);
        }
    }
    return report;
}

StabilityReport stability_ratio_check(LossKind kind, const std::vector<std::pair<double, double>>& pairs)
{
    StabilityReport report;
    for (const auto& [s, t] : pairs) update_stability(kind, s, t, report);
    return report;
}

}  // namespace penex

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "penex/model.hpp"
#include "penex/spd.hpp"

namespace penex {

enum class LossKind { squared, logistic };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& s);

/**
 * Regularity constants of the loss: B bounds the Lipschitz constant of
 * u -> l''(y, u) and B2 bounds l'' itself.
 *
 * For the logistic loss the commonly quoted B2 = 1 is kept in
 * `b2_reported`, while `b2_sharp` = sup l'' = 1/4 is the value used in bounds.
 */
struct LossConstants {
    double b;
    double b2_sharp;
    double b2_reported;
};

LossConstants loss_constants(LossKind kind);

// Squared: l = (y-u)^2/2. Logistic: the convex form l = (y-1)u + log(1+e^u),
// whose derivative y - 1/(1+e^u) is the mean-zero score under
// P(Y=1|x) = 1/(1+e^{x^T beta*}). Logistic labels must be 0 or 1.
double loss_value(LossKind kind, double y, double u);
double loss_d1(LossKind kind, double y, double u);
double loss_d2(LossKind kind, double y, double u);
/// Third partial derivative d l''/du.
double loss_d3(LossKind kind, double y, double u);

/// log(1 + e^u) without overflow.
double log1p_exp(double u);

enum class CurvatureProvenance { exact_sigma, stein_quadrature, mc_estimate };
std::string to_string(CurvatureProvenance p);

/// Population curvature K = n^{-1} sum E[l''(Y_i, X_i^T beta*) X_i X_i^T].
struct CurvatureMatrix {
    SpdMatrix k;
    CurvatureProvenance provenance = CurvatureProvenance::exact_sigma;

    Index dim() const noexcept { return k.dim(); }
    double norm(const VectorXd& u) const { return k.norm(u); }
};

/**
 * Closed-form K for a Gaussian design.
 *
 * Squared loss returns Sigma. For the logistic loss, with t = X^T beta* ~ N(0, v^2),
 * K = m0 Sigma + (m2/v^2 - m0) (Sigma beta*)(Sigma beta*)^T / v^2 where
 * m0 = E[l''(t)] and m2 = E[l''(t) t^2] are Gauss-Hermite expectations.
 * Non-Gaussian designs with the logistic loss throw; use curvature_matrix_mc.
 */
CurvatureMatrix curvature_matrix(LossKind kind, const CovarianceModel& cov, const VectorXd& beta_star,
                                 DesignKind design = DesignKind::gaussian);

/// Monte Carlo estimate of K from `num_samples` fresh design rows.
CurvatureMatrix curvature_matrix_mc(LossKind kind, const CovarianceModel& cov, const VectorXd& beta_star,
                                    DesignKind design, Index num_samples, std::uint64_t seed);

/// Largest eigenvalue of K^{-1/2} Sigma K^{-1/2}.
double b3_constant(const CovarianceModel& cov, const CurvatureMatrix& k);

/// alpha(tau) = inf_{|u| <= tau} l''(y, u).
double curvature_lower_bound(LossKind kind, double tau);

struct StabilityGrid {
    double lo = -10.0;
    double hi = 10.0;
    double step = 0.01;
    double max_gap = 5.0;
};

struct StabilityReport {
    double worst_quotient = 0.0;  // max of [l''(s)/l''(t)] / exp(3|s-t|)
    double worst_s = 0.0;
    double worst_t = 0.0;
    std::size_t pairs_checked = 0;
    bool holds() const noexcept { return worst_quotient <= 1.0; }
};

/// Checks l''(y,s)/l''(y,t) <= exp(3|s-t|) over all grid pairs with |s-t| <= max_gap.
StabilityReport stability_ratio_check(LossKind kind, const StabilityGrid& grid);
StabilityReport stability_ratio_check(LossKind kind, const std::vector<std::pair<double, double>>& pairs);

}  // namespace penex

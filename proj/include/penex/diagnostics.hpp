#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "penex/loss.hpp"
#include "penex/model.hpp"
#include "penex/penalty.hpp"

namespace penex {

struct ProxRisk {
    double risk = 0.0;
    double mc_se = 0.0;
};

/// E_Z ||beta* - prox_h(beta* + sigma* n^{-1/2} Z)||^2 by Monte Carlo over Z ~ N(0, I_p).
ProxRisk mc_prox_risk(const PenaltySpec& penalty, const VectorXd& beta_star, double sigma_star, Index n,
                      Index n_mc, std::uint64_t seed);

/// Same risk for the l1 penalty, one adaptive quadrature per distinct |beta*_j|.
double prox_risk_l1_quadrature(double lambda, const VectorXd& beta_star, double noise_scale);

struct RiskIdentityReport {
    double lhs = 0.0;    // ||beta_hat - beta*||
    double rhs = 0.0;    // sqrt of the prox risk
    double mc_se = 0.0;  // standard error of rhs (delta method)
    double ratio = 0.0;  // lhs / rhs, NaN when rhs == 0
    double noise_term = 0.0;      // sigma* (t + 1) / sqrt(n)
    double expansion_term = 0.0;  // ||beta_hat - eta||
    bool bound_holds = false;     // |lhs - rhs| <= noise_term + expansion_term
};

/// Requires a linear dataset with Gaussian design and identity covariance.
RiskIdentityReport risk_identity_check(const Dataset& data, const CovarianceModel& cov, const VectorXd& beta_hat,
                                       const VectorXd& eta, const PenaltySpec& penalty, Index n_mc,
                                       std::uint64_t seed, double t = 2.0);

struct InferenceReport {
    double theta_hat = 0.0;
    double target = 0.0;  // a^T beta* after normalization
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool covered = false;
    double t_stat = 0.0;   // sqrt(n) (theta_hat - target)
    double a_scale = 1.0;  // ||Sigma^{-1/2} a|| of the caller's a
};

/**
 * De-biased estimate of a^T beta* with known Sigma.
 *
 * `a` is rescaled so that ||Sigma^{-1/2} a|| = 1; the score vector is
 * z_a = X Sigma^{-1} a and the interval is theta_hat +- 1.96 / sqrt(n).
 */
InferenceReport debiased_estimate(const Dataset& data, const VectorXd& beta_hat, const CovarianceModel& cov,
                                  const VectorXd& a);

struct SparsityCount {
    Index coords = 0;
    Index groups_nonzero = 0;
};

/// Exact-zero counts. Without groups every coordinate is its own group.
SparsityCount sparsity_count(const VectorXd& beta, const GroupStructure* groups = nullptr);

/// 1 + C_max {2 (3 + xi)(1 + 1/xi)}^2 B3^2 / phi^2
double sparsity_constant(double c_max, double xi, double b3, double phi);

/**
 * Pointwise values of the quadratic and cubic processes at given directions,
 * with K_hat = n^{-1} sum l''(Y_i, X_i^T beta*) X_i X_i^T.
 */
class ProcessEvaluator {
public:
    ProcessEvaluator(const Dataset& data, LossKind loss, const CurvatureMatrix& k, const VectorXd& beta_star);

    /// |u^T K_hat u / ||u||_K^2 - 1|
    double q1(const VectorXd& u) const;
    /// |u^T (K_hat - K) v| / (||u||_K ||v||_K); symmetric in (u, v)
    double q2(const VectorXd& u, const VectorXd& v) const;
    /// n^{-1} sum |X_i^T u|^3 / ||u||_K^3
    double z(const VectorXd& u) const;

private:
    double empirical_form(const VectorXd& xu, const VectorXd& xv) const;
    void check(const VectorXd& u) const;

    const Dataset& data_;
    const CurvatureMatrix& k_;
    VectorXd weights_;
};

struct ProcessRecord {
    double q1 = 0.0;
    double z = 0.0;
    double norm_k = 0.0;
};

struct ProcessQuantities {
    std::vector<ProcessRecord> per_direction;
    MatrixXd q2;  // pairwise
};

ProcessQuantities process_quantities(const Dataset& data, LossKind loss, const CurvatureMatrix& k,
                                     const VectorXd& beta_star, const std::vector<VectorXd>& directions);

struct TaylorRemainderReport {
    double max_abs_a = 0.0;
    /// max_i |a_i(beta)| - B |X_i^T (beta - beta*)|; the bound holds when this is <= 0
    double max_violation = 0.0;
};

/// a_i(beta) = int_0^1 [l''(Y_i, X_i^T beta* + t X_i^T (beta - beta*)) - l''(Y_i, X_i^T beta*)] dt
TaylorRemainderReport taylor_remainder(const Dataset& data, LossKind loss, const VectorXd& beta,
                                       const VectorXd& beta_star);

struct RscReport {
    double theta_sq = 0.0;  // second-order remainder / ||u||_K^2
    double norm_k = 0.0;
    bool within_unit_ball = false;  // ||u||_K <= 1
    /// alpha(tau) ||X u||^2 / (2 n ||u||_K^2), tau = max_i max(|X_i^T beta*|, |X_i^T (beta* + u)|)
    double curvature_bound = 0.0;
};

RscReport rsc_empirical(const Dataset& data, LossKind loss, const CurvatureMatrix& k, const VectorXd& beta_star,
                        const VectorXd& u);

}  // namespace penex

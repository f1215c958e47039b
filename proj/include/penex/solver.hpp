#pragma once

#include <functional>
#include <optional>

#include "penex/loss.hpp"
#include "penex/model.hpp"
#include "penex/penalty.hpp"

namespace penex {

struct SolverConfig {
    int max_iters = 20000;
    double kkt_tol = 1e-8;
    /// Relative objective increase tolerated before a momentum restart fires.
    double objective_rel_tol = 1e-12;
    /// Backtracking multiplies the step by this factor on a failed sufficient-decrease test.
    double shrink = 0.5;
    std::optional<double> initial_step;

    void validate() const;
};

struct SolverResult {
    VectorXd solution;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    double wall_time = 0.0;  // seconds
};

/// f_n(beta) = n^{-1} sum l(Y_i, X_i^T beta)
double smooth_objective(const Dataset& data, LossKind loss, const VectorXd& beta);

/// grad f_n(beta) = n^{-1} sum l'(Y_i, X_i^T beta) X_i
VectorXd smooth_gradient(const Dataset& data, LossKind loss, const VectorXd& beta);

/**
 * Center z of the quadratic surrogate, z = beta* - K^{-1} grad f_n(beta*).
 * For the squared loss this is beta* + K^{-1} n^{-1} sum eps_i X_i.
 */
VectorXd expansion_center(const Dataset& data, LossKind loss, const CurvatureMatrix& k,
                          const VectorXd& beta_star);

/**
 * Penalized M-estimator: argmin f_n(beta) + h(beta).
 *
 * Accelerated proximal gradient with backtracking and function-value restart,
 * started at zero. Convergence means the subdifferential residual at the
 * returned point, recomputed from scratch, is at most `kkt_tol`; otherwise
 * `converged` is false and callers must check it.
 */
SolverResult fit_beta_hat(const Dataset& data, LossKind loss, const PenaltySpec& penalty,
                          const SolverConfig& config = {});

/**
 * First-order expansion: argmin ||K^{1/2}(beta - z)||^2 / 2 + h(beta).
 *
 * Step 1/lambda_max(K), started at z. Refuses Monte Carlo curvature estimates
 * unless `allow_mc_curvature` is set.
 */
SolverResult fit_eta(const Dataset& data, LossKind loss, const CurvatureMatrix& k, const VectorXd& beta_star,
                     const PenaltySpec& penalty, const SolverConfig& config = {},
                     bool allow_mc_curvature = false);

/// Same surrogate problem for a given center z.
SolverResult minimize_quadratic_surrogate(const CurvatureMatrix& k, const VectorXd& center,
                                          const PenaltySpec& penalty, const SolverConfig& config = {});

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
double power_iteration(const std::function<VectorXd(const VectorXd&)>& op, Index dim, double rel_tol,
                       int max_iters);

}  // namespace penex

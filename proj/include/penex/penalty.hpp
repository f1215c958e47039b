#pragma once

#include <string>
#include <variant>

#include "penex/model.hpp"

namespace penex {

/// h(b) = lambda ||b||_1
struct L1Penalized {
    double lambda = 0.0;
};

/// h(b) = 0 if ||b||_1 <= radius, +inf otherwise
struct L1Constrained {
    double radius = 1.0;
};

/// h(b) = lambda sum_k ||b_{G_k}||
struct GroupLasso {
    double lambda = 0.0;
    GroupStructure groups;
};

using PenaltySpec = std::variant<L1Penalized, L1Constrained, GroupLasso>;

PenaltySpec make_l1_penalized(double lambda);
PenaltySpec make_l1_constrained(double radius);
PenaltySpec make_group_lasso(double lambda, GroupStructure groups);

std::string penalty_name(const PenaltySpec& spec);

/// Value of h; +infinity outside the l1 ball (beyond kBoundaryTolerance) for the constrained variant.
double penalty_value(const PenaltySpec& spec, const VectorXd& beta);

/**
 * prox_{t h}(x) = argmin_b ||x - b||^2 / 2 + t h(b).
 *
 * Thresholded coordinates are exact zeros. The constrained variant is the
 * Euclidean projection onto the l1 ball (independent of t).
 */
VectorXd prox(const PenaltySpec& spec, const VectorXd& x, double step);

double soft_threshold(double x, double threshold);

/// Euclidean projection onto {b : ||b||_1 <= radius} by sort-and-threshold.
VectorXd project_l1_ball(const VectorXd& x, double radius);

/// Tolerance for deciding ||b||_1 == radius in the constrained KKT check.
inline constexpr double kBoundaryTolerance = 1e-9;

/**
 * Sup-norm violation of the optimality condition -grad in dh(beta).
 *
 * Zero exactly when the condition holds. Returns +infinity when beta is
 * infeasible for the constrained variant.
 */
double subdifferential_residual(const PenaltySpec& spec, const VectorXd& beta, const VectorXd& grad);

}  // namespace penex

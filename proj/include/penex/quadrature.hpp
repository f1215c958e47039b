#pragma once

#include <functional>
#include <vector>

namespace penex {

struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite rule for the standard normal weight (probabilists' Hermite,
/// weights sum to one), computed by Golub-Welsch.
GaussRule gauss_hermite_normal(int num_nodes);

/// E[f(Z)], Z ~ N(0,1). Doubles the node count from 64 until successive
/// estimates agree to `rel_tol` (at most 1024 nodes).
double normal_expectation(const std::function<double(double)>& f, double rel_tol = 1e-13);

/// Adaptive Gauss-Kronrod integral of f over [a, b]; infinite bounds allowed.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-12, double* error_estimate = nullptr);

}  // namespace penex

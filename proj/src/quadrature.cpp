#include "penex/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace penex {

GaussRule gauss_hermite_normal(int num_nodes)
{
    // Jacobi matrix of the monic probabilists' Hermite recurrence:
    // He_{k+1} = x He_k - k He_{k-1}.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(num_nodes, num_nodes);
    for (int k = 1; k < num_nodes; ++k) {
        jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
        jacobi(k - 1, k) = jacobi(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(num_nodes));
    rule.weights.resize(static_cast<std::size_t>(num_nodes));
    for (int i = 0; i < num_nodes; ++i) {
        const double v0 = eig.eigenvectors()(0, i);
        rule.nodes[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
        rule.weights[static_cast<std::size_t>(i)] = v0 * v0;
    }
    return rule;
}

namespace {

const GaussRule& cached_rule(int num_nodes)
{
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(num_nodes);
    if (it == cache.end()) it = cache.emplace(num_nodes, gauss_hermite_normal(num_nodes)).first;
    return it->second;
}

double apply_rule(const GaussRule& rule, const std::function<double(double)>& f)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(rule.nodes[i]);
    return acc;
}

}  // namespace

double normal_expectation(const std::function<double(double)>& f, double rel_tol)
{
    double previous = apply_rule(cached_rule(64), f);
    for (int nodes = 128; nodes <= 1024; nodes *= 2) {
        const double current = apply_rule(cached_rule(nodes), f);
        if (std::abs(current - previous) <= rel_tol * std::max(1.0, std::abs(current))) return current;
        previous = current;
    }
    return previous;
}

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 double* error_estimate)
{
    double err = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, rel_tol, &err);
    if (error_estimate) *error_estimate = err;
    return value;
}

}  // namespace penex

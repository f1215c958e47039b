#pragma once

// Independent reference computations used only by the tests. Nothing here
// shares code with the library paths it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Cyclic coordinate descent for 0.5 (x - z)^T K (x - z) + lambda ||x||_1.
inline VectorXd cd_lasso_quadratic(const MatrixXd& k, const VectorXd& z, double lambda, int sweeps = 20000,
                                   double tol = 1e-15)
{
    const Index p = z.size();
    VectorXd x = z;
    VectorXd grad = k * (x - z);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double moved = 0.0;
        for (Index j = 0; j < p; ++j) {
            const double kjj = k(j, j);
            // unpenalized coordinate minimizer given the others
            const double c = x(j) - grad(j) / kjj;
            const double t = lambda / kjj;
            const double next = c > t ? c - t : (c < -t ? c + t : 0.0);
            const double delta = next - x(j);
            if (delta != 0.0) {
                grad += delta * k.col(j);
                x(j) = next;
                moved = std::max(moved, std::abs(delta));
            }
        }
        if (moved < tol) break;
    }
    return x;
}

/// Blockwise coordinate descent for 0.5 (x - z)^T K (x - z) + lambda sum ||x_G||,
/// exact block updates only when K restricted to each block is c I.
inline VectorXd bcd_group_quadratic_isotropic_blocks(const MatrixXd& k, const VectorXd& z, double lambda,
                                                     Index group_size, int sweeps = 20000)
{
    const Index p = z.size();
    VectorXd x = z;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double moved = 0.0;
        for (Index g = 0; g < p / group_size; ++g) {
            const Index b = g * group_size;
            const double c = k(b, b);
            const VectorXd grad = (k * (x - z)).segment(b, group_size);
            const VectorXd v = x.segment(b, group_size) - grad / c;
            const double nv = v.norm();
            const VectorXd next = nv > lambda / c ? VectorXd((1.0 - lambda / (c * nv)) * v)
                                                  : VectorXd(VectorXd::Zero(group_size));
            moved = std::max(moved, (next - x.segment(b, group_size)).lpNorm<Eigen::Infinity>());
            x.segment(b, group_size) = next;
        }
        if (moved < 1e-15) break;
    }
    return x;
}

/// Distance from the scalar a to the interval [lo, hi].
inline double interval_distance(double a, double lo, double hi)
{
    if (a < lo) return lo - a;
    if (a > hi) return a - hi;
    return 0.0;
}

/// Central difference of f at x.
inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5)
{
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Simpson's rule on [a, b] with `intervals` (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals = 20000)
{
    const double h = (b - a) / intervals;
    double acc = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

/// E f(Z) for Z ~ N(0, 1) by Simpson on [-12, 12], split at the given kinks of f.
inline double normal_mean(const std::function<double(double)>& f, std::vector<double> kinks = {})
{
    const double c = 1.0 / std::sqrt(2.0 * M_PI);
    auto w = [&](double g) { return f(g) * c * std::exp(-0.5 * g * g); };
    kinks.push_back(-12.0);
    kinks.push_back(12.0);
    std::sort(kinks.begin(), kinks.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < kinks.size(); ++i) {
        const double a = std::clamp(kinks[i], -12.0, 12.0), b = std::clamp(kinks[i + 1], -12.0, 12.0);
        if (b > a) acc += simpson(w, a, b, 40000);
    }
    return acc;
}

/// Mean and standard error.
struct Moments {
    double mean;
    double se;
};

inline Moments moments(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    s2 /= static_cast<double>(v.size() - 1);
    return {m, std::sqrt(s2 / static_cast<double>(v.size()))};
}

/// Random unit vector.
inline VectorXd random_unit(std::mt19937_64& rng, Index p)
{
    std::normal_distribution<double> normal;
    VectorXd v(p);
    for (Index j = 0; j < p; ++j) v(j) = normal(rng);
    return v / v.norm();
}

}  // namespace oracle

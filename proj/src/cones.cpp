#include "penex/cones.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "penex/rng.hpp"

namespace penex {

ConeSpec make_lasso_cone(double k)
{
    if (!(k >= 1.0)) throw std::invalid_argument("lasso cone: k must be >= 1");
    return LassoCone{k};
}

ConeSpec make_group_cone(double c, Index s, GroupStructure groups)
{
    if (!(c > 0.0) || s < 1) throw std::invalid_argument("group cone: need c > 0 and s >= 1");
    return GroupCone{c, s, std::move(groups)};
}

ConeSpec make_support_cone(std::vector<Index> support)
{
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    return SupportCone{std::move(support)};
}

double lambda_lasso(LossKind loss, double subgaussian_l, double sigma_star, double xi, Index p, Index s, Index n)
{
    if (s < 1 || p <= s) throw std::invalid_argument("lambda_lasso: need p > s >= 1");
    if (!(xi > 0.0) || n < 1) throw std::invalid_argument("lambda_lasso: need xi > 0 and n >= 1");
    const double base = (1.0 + 3.0 * xi) *
                        std::sqrt(2.0 * std::log(static_cast<double>(p) / static_cast<double>(s)) /
                                  static_cast<double>(n));
    if (loss == LossKind::logistic) return 0.5 * subgaussian_l * base;
    return subgaussian_l * sigma_star * base;
}

double lambda_group(double subgaussian_l, double sigma_star, double xi, Index d, Index m, Index s, Index n)
{
    if (s < 1 || m <= s) throw std::invalid_argument("lambda_group: need M > s >= 1");
    if (d < 1 || !(xi > 0.0) || n < 1) throw std::invalid_argument("lambda_group: need d >= 1, xi > 0, n >= 1");
    const double log_term = std::sqrt(2.0 * std::log(static_cast<double>(m) / static_cast<double>(s)));
    return subgaussian_l * sigma_star * (1.0 + xi) *
           (std::sqrt(static_cast<double>(d)) + (1.0 + 2.0 * xi) * log_term) / std::sqrt(static_cast<double>(n));
}

ConeSpec lasso_error_cone(Index s, double xi)
{
    const double factor = 6.0 + 2.0 / xi;
    return make_lasso_cone(static_cast<double>(s) * factor * factor);
}

ConeSpec group_error_cone(Index s, double xi, GroupStructure groups)
{
    return make_group_cone(2.0 + 3.0 / xi, s, std::move(groups));
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

bool cone_member(const ConeSpec& cone, const VectorXd& u, double tol)
{
    const double norm = u.norm();
    if (norm == 0.0) return true;
    return std::visit(
        overloaded{
            [&](const LassoCone& c) { return u.lpNorm<1>() <= std::sqrt(c.k) * norm * (1.0 + tol); },
            [&](const GroupCone& c) {
                if (c.groups.dim() != u.size()) throw std::invalid_argument("cone_member: dimension mismatch");
                double acc = 0.0;
                for (Index k = 0; k < c.groups.num_groups(); ++k) acc += c.groups.group_norm(u, k);
                return acc <= c.c * std::sqrt(static_cast<double>(c.s)) * norm * (1.0 + tol);
            },
            [&](const SupportCone& c) {
                double on = 0.0;
                for (Index j : c.support) {
                    if (j < 0 || j >= u.size()) throw std::invalid_argument("cone_member: support out of range");
                    on += std::abs(u(j));
                }
                const double off = u.lpNorm<1>() - on;
                return off <= on * (1.0 + tol) + tol * norm;
            },
        },
        cone);
}

double lasso_cone_sup(const VectorXd& g, double k)
{
    const Index p = g.size();
    const double gnorm = g.norm();
    if (gnorm == 0.0) return 0.0;
    const double root_k = std::sqrt(k);
    if (g.lpNorm<1>() <= root_k * gnorm) return gnorm;

    std::vector<double> mags(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) mags[static_cast<std::size_t>(j)] = std::abs(g(j));
    std::sort(mags.begin(), mags.end(), std::greater<>());

    // l1/l2 ratio and value g^T u / ||u|| of u = soft_threshold(g, t).
    auto evaluate = [&](double t, double& ratio, double& value) {
        double l1 = 0.0, l2 = 0.0, inner = 0.0;
        for (double m : mags) {
            if (m <= t) break;
            const double r = m - t;
            l1 += r;
            l2 += r * r;
            inner += m * r;
        }
        l2 = std::sqrt(l2);
        ratio = l1 / l2;
        value = inner / l2;
    };

    // ratio(t) is non-increasing; at the second-largest magnitude only the top entry survives.
    double lo = 0.0;
    double hi = mags.size() > 1 ? mags[1] : 0.0;
    double ratio = 0.0, value = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        evaluate(mid, ratio, value);
        if (ratio <= root_k) hi = mid;
        else lo = mid;
    }
    evaluate(hi, ratio, value);
    return value;
}

GammaEstimate gamma_estimate(const ConeSpec& cone, const CovarianceModel& cov, Index n_mc, std::uint64_t seed)
{
    const auto* lasso = std::get_if<LassoCone>(&cone);
    if (!lasso || !cov.matrix().is_scaled_identity())
        throw std::invalid_argument(
            "gamma_estimate: only lasso cones under an isotropic covariance are supported; use gamma_bound");
    if (n_mc < 2) throw std::invalid_argument("gamma_estimate: need at least two draws");
    Engine engine = make_engine(seed, Stream::gamma_mc);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd g(cov.dim());
    double sum = 0.0, sum_sq = 0.0;
    for (Index r = 0; r < n_mc; ++r) {
        for (Index j = 0; j < g.size(); ++j) g(j) = normal(engine);
        const double v = lasso_cone_sup(g, lasso->k);
        sum += v;
        sum_sq += v * v;
    }
    const double n = static_cast<double>(n_mc);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

double GammaBound::rate(Index n) const { return value / std::sqrt(static_cast<double>(n)); }

GammaBound gamma_bound(const ConeSpec& cone, const CovarianceModel& cov)
{
    const double p = static_cast<double>(cov.dim());
    auto lasso_bound = [&](double k, double phi) {
        const double k_eff = std::min(k, p);  // the cone is all of R^p once k >= p
        return std::sqrt(k_eff * std::log(2.0 * p / k_eff)) / phi;
    };
    const double phi_global = std::sqrt(cov.matrix().lambda_min());
    return std::visit(
        overloaded{
            [&](const LassoCone& c) { return GammaBound{lasso_bound(c.k, phi_global), "1"}; },
            [&](const GroupCone& c) {
                const double s = static_cast<double>(c.s);
                const double d = static_cast<double>(c.groups.group_size());
                const double m = static_cast<double>(c.groups.num_groups());
                return GammaBound{std::sqrt(s * d + s * std::log(m / s)) / phi_global, "C(xi)"};
            },
            [&](const SupportCone& c) {
                const double s = std::max<double>(1.0, static_cast<double>(c.support.size()));
                return GammaBound{lasso_bound(4.0 * s, phi_global), "1"};
            },
        },
        cone);
}

double phi_lower_bound(const ConeSpec& cone, const CovarianceModel& cov)
{
    if (const auto* c = std::get_if<SupportCone>(&cone)) {
        if (c->support.empty()) throw std::invalid_argument("phi_lower_bound: empty support");
        return std::sqrt(cov.matrix().restrict_to(c->support).lambda_min());
    }
    return std::sqrt(cov.matrix().lambda_min());
}

ConeSpec sparse_cone_from_counts(Index s, double c_tilde)
{
    if (!(c_tilde >= 0.0)) throw std::invalid_argument("sparse_cone_from_counts: C must be >= 0");
    return make_lasso_cone((2.0 * c_tilde + 1.0) * static_cast<double>(s));
}

double rate_lasso(Index n, Index p, Index s)
{
    return std::sqrt(2.0 * static_cast<double>(s) * std::log(static_cast<double>(p) / static_cast<double>(s)) /
                     static_cast<double>(n));
}

double rate_group(Index n, Index d, Index m, Index s)
{
    const double sd = static_cast<double>(s);
    return std::sqrt((sd * static_cast<double>(d) + sd * std::log(static_cast<double>(m) / sd)) /
                     static_cast<double>(n));
}

}  // namespace penex

#include "penex/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "penex/quadrature.hpp"
#include "penex/rng.hpp"

namespace penex {

ProxRisk mc_prox_risk(const PenaltySpec& penalty, const VectorXd& beta_star, double sigma_star, Index n,
                      Index n_mc, std::uint64_t seed)
{
    if (n < 1 || n_mc < 2) throw std::invalid_argument("mc_prox_risk: need n >= 1 and n_mc >= 2");
    const double tau = sigma_star / std::sqrt(static_cast<double>(n));
    Engine engine = make_engine(seed, Stream::monte_carlo);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd point(beta_star.size());
    double sum = 0.0, sum_sq = 0.0;
    for (Index r = 0; r < n_mc; ++r) {
        for (Index j = 0; j < point.size(); ++j) point(j) = beta_star(j) + tau * normal(engine);
        const double loss = (prox(penalty, point, 1.0) - beta_star).squaredNorm();
        sum += loss;
        sum_sq += loss * loss;
    }
    const double m = static_cast<double>(n_mc);
    const double mean = sum / m;
    const double var = std::max(0.0, (sum_sq - m * mean * mean) / (m - 1.0));
    return {mean, std::sqrt(var / m)};
}

double prox_risk_l1_quadrature(double lambda, const VectorXd& beta_star, double noise_scale)
{
    if (!(lambda >= 0.0) || !(noise_scale >= 0.0)) throw std::invalid_argument("prox risk: bad parameters");
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    constexpr double kInf = std::numeric_limits<double>::infinity();

    std::map<double, double> cache;
    auto coordinate_risk = [&](double theta) {
        if (noise_scale == 0.0) {
            const double d = soft_threshold(theta, lambda) - theta;
            return d * d;
        }
        auto integrand = [&](double g) {
            const double d = soft_threshold(theta + noise_scale * g, lambda) - theta;
            return d * d * kInvSqrt2Pi * std::exp(-0.5 * g * g);
        };
        // Split at the two kinks of the soft-threshold map.
        const double lo = (-lambda - theta) / noise_scale;
        const double hi = (lambda - theta) / noise_scale;
        return integrate(integrand, -kInf, lo) + integrate(integrand, lo, hi) + integrate(integrand, hi, kInf);
    };

    double total = 0.0;
    for (Index j = 0; j < beta_star.size(); ++j) {
        const double theta = std::abs(beta_star(j));  // risk is symmetric in the sign of theta
        auto it = cache.find(theta);
        if (it == cache.end()) it = cache.emplace(theta, coordinate_risk(theta)).first;
        total += it->second;
    }
    return total;
}

RiskIdentityReport risk_identity_check(const Dataset& data, const CovarianceModel& cov, const VectorXd& beta_hat,
                                       const VectorXd& eta, const PenaltySpec& penalty, Index n_mc,
                                       std::uint64_t seed, double t)
{
    if (data.model_kind != ModelKind::linear)
        throw std::invalid_argument("risk_identity_check: requires the linear model");
    if (!cov.is_identity() || data.design_kind != DesignKind::gaussian)
        throw std::invalid_argument(
            "risk_identity_check: the exact risk identity assumes a Gaussian design with identity covariance");
    if (beta_hat.size() != data.p() || eta.size() != data.p())
        throw std::invalid_argument("risk_identity_check: dimension mismatch");

    const double sstar = sigma_star(data);
    const ProxRisk risk = mc_prox_risk(penalty, data.beta_star, sstar, data.n(), n_mc, seed);

    RiskIdentityReport rep;
    rep.lhs = (beta_hat - data.beta_star).norm();
    rep.rhs = std::sqrt(risk.risk);
    rep.mc_se = rep.rhs > 0.0 ? risk.mc_se / (2.0 * rep.rhs) : 0.0;
    rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : std::numeric_limits<double>::quiet_NaN();
    rep.noise_term = sstar * (t + 1.0) / std::sqrt(static_cast<double>(data.n()));
    rep.expansion_term = (beta_hat - eta).norm();
    rep.bound_holds = std::abs(rep.lhs - rep.rhs) <= rep.noise_term + rep.expansion_term + 1e-12;
    return rep;
}

InferenceReport debiased_estimate(const Dataset& data, const VectorXd& beta_hat, const CovarianceModel& cov,
                                  const VectorXd& a)
{
    if (a.size() != data.p() || beta_hat.size() != data.p() || cov.dim() != data.p())
        throw std::invalid_argument("debiased_estimate: dimension mismatch");
    if (a.norm() == 0.0) throw std::invalid_argument("debiased_estimate: a must be nonzero");

    const SpdMatrix& sigma = cov.matrix();
    InferenceReport rep;
    rep.a_scale = sigma.apply_inverse_sqrt(a).norm();
    const VectorXd a_unit = a / rep.a_scale;
    const VectorXd score = data.X * sigma.apply_inverse(a_unit);
    const VectorXd residual = data.y - data.X * beta_hat;
    const double n = static_cast<double>(data.n());

    rep.theta_hat = a_unit.dot(beta_hat) + score.dot(residual) / score.squaredNorm();
    rep.target = data.beta_star.size() == data.p() ? a_unit.dot(data.beta_star) : 0.0;
    const double half_width = 1.96 / std::sqrt(n);
    rep.ci_low = rep.theta_hat - half_width;
    rep.ci_high = rep.theta_hat + half_width;
    rep.covered = rep.ci_low <= rep.target && rep.target <= rep.ci_high;
    rep.t_stat = std::sqrt(n) * (rep.theta_hat - rep.target);
    return rep;
}

SparsityCount sparsity_count(const VectorXd& beta, const GroupStructure* groups)
{
    SparsityCount out;
    for (Index j = 0; j < beta.size(); ++j) out.coords += beta(j) != 0.0;
    if (!groups) {
        out.groups_nonzero = out.coords;
        return out;
    }
    if (groups->dim() != beta.size()) throw std::invalid_argument("sparsity_count: dimension mismatch");
    for (const auto& g : groups->groups()) {
        for (Index j : g) {
            if (beta(j) != 0.0) {
                ++out.groups_nonzero;
                break;
            }
        }
    }
    return out;
}

double sparsity_constant(double c_max, double xi, double b3, double phi)
{
    if (!(c_max > 0.0 && xi > 0.0 && b3 > 0.0 && phi > 0.0))
        throw std::invalid_argument("sparsity_constant: arguments must be positive");
    const double inner = 2.0 * (3.0 + xi) * (1.0 + 1.0 / xi);
    return 1.0 + c_max * inner * inner * b3 * b3 / (phi * phi);
}

// ---------------------------------------------------------------------------
// Process quantities

ProcessEvaluator::ProcessEvaluator(const Dataset& data, LossKind loss, const CurvatureMatrix& k,
                                   const VectorXd& beta_star)
    : data_(data), k_(k)
{
    if (k.dim() != data.p() || beta_star.size() != data.p())
        throw std::invalid_argument("process quantities: dimension mismatch");
    const VectorXd u0 = data.X * beta_star;
    weights_.resize(data.n());
    for (Index i = 0; i < data.n(); ++i) weights_(i) = loss_d2(loss, data.y(i), u0(i));
}

void ProcessEvaluator::check(const VectorXd& u) const
{
    if (u.size() != data_.p()) throw std::invalid_argument("process quantities: dimension mismatch");
    if (u.norm() == 0.0) throw std::invalid_argument("process quantities: zero direction");
}

double ProcessEvaluator::empirical_form(const VectorXd& xu, const VectorXd& xv) const
{
    double acc = 0.0;
    for (Index i = 0; i < xu.size(); ++i) acc += weights_(i) * (xu(i) * xv(i));
    return acc / static_cast<double>(xu.size());
}

double ProcessEvaluator::q1(const VectorXd& u) const
{
    check(u);
    const VectorXd xu = data_.X * u;
    const double nk2 = k_.k.quad_form(u);
    return std::abs(empirical_form(xu, xu) / nk2 - 1.0);
}

double ProcessEvaluator::q2(const VectorXd& u, const VectorXd& v) const
{
    check(u);
    check(v);
    const VectorXd ru = k_.k.apply_sqrt(u);
    const VectorXd rv = k_.k.apply_sqrt(v);
    const double population = ru.dot(rv);
    const double empirical = empirical_form(data_.X * u, data_.X * v);
    return std::abs(empirical - population) / (ru.norm() * rv.norm());
}

double ProcessEvaluator::z(const VectorXd& u) const
{
    check(u);
    const VectorXd xu = data_.X * u;
    const double nk = k_.k.norm(u);
    return xu.array().abs().cube().sum() / static_cast<double>(xu.size()) / (nk * nk * nk);
}

ProcessQuantities process_quantities(const Dataset& data, LossKind loss, const CurvatureMatrix& k,
                                     const VectorXd& beta_star, const std::vector<VectorXd>& directions)
{
    const ProcessEvaluator eval(data, loss, k, beta_star);
    ProcessQuantities out;
    const auto m = static_cast<Index>(directions.size());
    out.q2.resize(m, m);
    for (const auto& u : directions) out.per_direction.push_back({eval.q1(u), eval.z(u), k.norm(u)});
    for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b)
            out.q2(a, b) = eval.q2(directions[static_cast<std::size_t>(a)], directions[static_cast<std::size_t>(b)]);
    return out;
}

TaylorRemainderReport taylor_remainder(const Dataset& data, LossKind loss, const VectorXd& beta,
                                       const VectorXd& beta_star)
{
    if (beta.size() != data.p() || beta_star.size() != data.p())
        throw std::invalid_argument("taylor_remainder: dimension mismatch");
    const double b = loss_constants(loss).b;
    const VectorXd u0 = data.X * beta_star;
    const VectorXd d = data.X * (beta - beta_star);
    TaylorRemainderReport rep;
    rep.max_violation = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < data.n(); ++i) {
        const double y = data.y(i);
        const double base = loss_d2(loss, y, u0(i));
        double a = 0.0;
        if (loss != LossKind::squared && d(i) != 0.0) {
            a = integrate([&](double t) { return loss_d2(loss, y, u0(i) + t * d(i)) - base; }, 0.0, 1.0, 1e-13);
        }
        rep.max_abs_a = std::max(rep.max_abs_a, std::abs(a));
        rep.max_violation = std::max(rep.max_violation, std::abs(a) - b * std::abs(d(i)));
    }
    return rep;
}

RscReport rsc_empirical(const Dataset& data, LossKind loss, const CurvatureMatrix& k, const VectorXd& beta_star,
                        const VectorXd& u)
{
    if (u.size() != data.p() || beta_star.size() != data.p() || k.dim() != data.p())
        throw std::invalid_argument("rsc_empirical: dimension mismatch");
    if (u.norm() == 0.0) throw std::invalid_argument("rsc_empirical: zero direction");
    const VectorXd u0 = data.X * beta_star;
    const VectorXd xu = data.X * u;
    double remainder = 0.0;
    double tau = 0.0;
    for (Index i = 0; i < data.n(); ++i) {
        const double y = data.y(i);
        if (loss == LossKind::squared) {
            remainder += 0.5 * xu(i) * xu(i);
        } else {
            remainder += loss_value(loss, y, u0(i) + xu(i)) - loss_value(loss, y, u0(i)) -
                         xu(i) * loss_d1(loss, y, u0(i));
        }
        tau = std::max({tau, std::abs(u0(i)), std::abs(u0(i) + xu(i))});
    }
    const double n = static_cast<double>(data.n());
    RscReport rep;
    rep.norm_k = k.norm(u);
    rep.within_unit_ball = rep.norm_k <= 1.0;
    const double nk2 = rep.norm_k * rep.norm_k;
    rep.theta_sq = remainder / n / nk2;
    rep.curvature_bound = 0.5 * curvature_lower_bound(loss, tau) * xu.squaredNorm() / n / nk2;
    return rep;
}

}  // namespace penex

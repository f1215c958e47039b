#include "penex/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace penex {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dim(const PenaltySpec& spec, Index size)
{
    if (const auto* g = std::get_if<GroupLasso>(&spec); g && g->groups.dim() != size)
        throw std::invalid_argument("penalty: group structure does not match vector dimension");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

PenaltySpec make_l1_penalized(double lambda)
{
    if (!(lambda >= 0.0)) throw std::invalid_argument("l1 penalty: lambda must be >= 0");
    return L1Penalized{lambda};
}

PenaltySpec make_l1_constrained(double radius)
{
    if (!(radius > 0.0)) throw std::invalid_argument("l1 constraint: radius must be > 0");
    return L1Constrained{radius};
}

PenaltySpec make_group_lasso(double lambda, GroupStructure groups)
{
    if (!(lambda >= 0.0)) throw std::invalid_argument("group lasso: lambda must be >= 0");
    return GroupLasso{lambda, std::move(groups)};
}

std::string penalty_name(const PenaltySpec& spec)
{
    return std::visit(overloaded{[](const L1Penalized&) { return std::string("l1_penalized"); },
                                 [](const L1Constrained&) { return std::string("l1_constrained"); },
                                 [](const GroupLasso&) { return std::string("group_lasso"); }},
                      spec);
}

double penalty_value(const PenaltySpec& spec, const VectorXd& beta)
{
    check_dim(spec, beta.size());
    return std::visit(
        overloaded{
            [&](const L1Penalized& h) { return h.lambda * beta.lpNorm<1>(); },
            [&](const L1Constrained& h) { return beta.lpNorm<1>() <= h.radius + kBoundaryTolerance ? 0.0 : kInf; },
            [&](const GroupLasso& h) {
                double acc = 0.0;
                for (Index k = 0; k < h.groups.num_groups(); ++k) acc += h.groups.group_norm(beta, k);
                return h.lambda * acc;
            },
        },
        spec);
}

double soft_threshold(double x, double threshold)
{
    if (x > threshold) return x - threshold;
    if (x < -threshold) return x + threshold;
    return 0.0;
}

VectorXd project_l1_ball(const VectorXd& x, double radius)
{
    if (!(radius > 0.0)) throw std::invalid_argument("project_l1_ball: radius must be > 0");
    // slack absorbs the rounding of a previous projection so the map is idempotent
    if (x.lpNorm<1>() <= radius * (1.0 + 1e-14)) return x;

    std::vector<double> mags(static_cast<std::size_t>(x.size()));
    for (Index j = 0; j < x.size(); ++j) mags[static_cast<std::size_t>(j)] = std::abs(x(j));
    std::sort(mags.begin(), mags.end(), std::greater<>());

    // Largest k with mags[k-1] > (sum_{i<k} mags[i] - radius) / k.
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < mags.size(); ++k) {
        cumsum += mags[k];
        const double candidate = (cumsum - radius) / static_cast<double>(k + 1);
        if (mags[k] > candidate) theta = candidate;
        else break;
    }
    VectorXd out(x.size());
    for (Index j = 0; j < x.size(); ++j) out(j) = soft_threshold(x(j), theta);
    return out;
}

VectorXd prox(const PenaltySpec& spec, const VectorXd& x, double step)
{
    if (!(step > 0.0)) throw std::invalid_argument("prox: step must be > 0");
    check_dim(spec, x.size());
    return std::visit(
        overloaded{
            [&](const L1Penalized& h) {
                const double thr = step * h.lambda;
                VectorXd out(x.size());
                for (Index j = 0; j < x.size(); ++j) out(j) = soft_threshold(x(j), thr);
                return out;
            },
            [&](const L1Constrained& h) { return project_l1_ball(x, h.radius); },
            [&](const GroupLasso& h) {
                const double thr = step * h.lambda;
                VectorXd out = VectorXd::Zero(x.size());
                for (Index k = 0; k < h.groups.num_groups(); ++k) {
                    const double norm = h.groups.group_norm(x, k);
                    if (norm <= thr) continue;
                    const double factor = 1.0 - thr / norm;
                    for (Index j : h.groups.group(k)) out(j) = factor * x(j);
                }
                return out;
            },
        },
        spec);
}

double subdifferential_residual(const PenaltySpec& spec, const VectorXd& beta, const VectorXd& grad)
{
    if (beta.size() != grad.size()) throw std::invalid_argument("subdifferential_residual: dimension mismatch");
    check_dim(spec, beta.size());
    return std::visit(
        overloaded{
            [&](const L1Penalized& h) {
                double worst = 0.0;
                for (Index j = 0; j < beta.size(); ++j) {
                    const double r = beta(j) != 0.0 ? std::abs(grad(j) + h.lambda * sign(beta(j)))
                                                    : std::max(0.0, std::abs(grad(j)) - h.lambda);
                    worst = std::max(worst, r);
                }
                return worst;
            },
            [&](const L1Constrained& h) {
                const double l1 = beta.lpNorm<1>();
                if (l1 > h.radius + kBoundaryTolerance) return kInf;
                const double mu = grad.lpNorm<Eigen::Infinity>();
                if (l1 < h.radius - kBoundaryTolerance) return mu;
                double worst = 0.0;
                for (Index j = 0; j < beta.size(); ++j)
                    if (beta(j) != 0.0) worst = std::max(worst, std::abs(grad(j) + mu * sign(beta(j))));
                return worst;
            },
            [&](const GroupLasso& h) {
                double worst = 0.0;
                for (Index k = 0; k < h.groups.num_groups(); ++k) {
                    const auto& idx = h.groups.group(k);
                    const double bnorm = h.groups.group_norm(beta, k);
                    double r = 0.0;
                    if (bnorm != 0.0) {
                        double acc = 0.0;
                        for (Index j : idx) {
                            const double v = grad(j) + h.lambda * beta(j) / bnorm;
                            acc += v * v;
                        }
                        r = std::sqrt(acc);
                    } else {
                        r = std::max(0.0, h.groups.group_norm(grad, k) - h.lambda);
                    }
                    worst = std::max(worst, r);
                }
                return worst;
            },
        },
        spec);
}

}  // namespace penex

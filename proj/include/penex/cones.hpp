#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "penex/loss.hpp"
#include "penex/model.hpp"

namespace penex {

/// {u : ||u||_1 <= sqrt(k) ||u||}, k >= 1.
struct LassoCone {
    double k = 1.0;
};

/// {u : sum_k ||u_{G_k}|| <= c sqrt(s) ||u||}.
struct GroupCone {
    double c = 1.0;
    Index s = 1;
    GroupStructure groups;
};

/// {u : ||u_{S^c}||_1 <= ||u_S||_1}.
struct SupportCone {
    std::vector<Index> support;
};

using ConeSpec = std::variant<LassoCone, GroupCone, SupportCone>;

ConeSpec make_lasso_cone(double k);
ConeSpec make_group_cone(double c, Index s, GroupStructure groups);
ConeSpec make_support_cone(std::vector<Index> support);

/// Tuning for the l1 penalty:
///   squared:  L sigma* (1 + 3 xi) sqrt(2 log(p/s) / n)
///   logistic: (L/2) (1 + 3 xi) sqrt(2 log(p/s) / n)
double lambda_lasso(LossKind loss, double subgaussian_l, double sigma_star, double xi, Index p, Index s, Index n);

/// Group tuning L sigma* (1 + xi) [sqrt(d) + (1 + 2 xi) sqrt(2 log(M/s))] / sqrt(n).
/// For the logistic loss pass sigma* = 1/2.
double lambda_group(double subgaussian_l, double sigma_star, double xi, Index d, Index m, Index s, Index n);

/// Cone used for the penalized Lasso error vectors: lasso_cone(s (6 + 2/xi)^2).
ConeSpec lasso_error_cone(Index s, double xi);
/// Cone used for the Group-Lasso error vectors: group_cone(2 + 3/xi, s, groups).
ConeSpec group_error_cone(Index s, double xi, GroupStructure groups);

/// Evaluates the defining inequality with relative slack `tol`. Zero is always a member.
bool cone_member(const ConeSpec& cone, const VectorXd& u, double tol = 1e-9);

/// sup { g^T u : u in lasso_cone(k), ||u|| = 1 } for one Gaussian draw g.
double lasso_cone_sup(const VectorXd& g, double k);

struct GammaEstimate {
    double estimate = 0.0;
    double mc_se = 0.0;
};

/// Monte Carlo Gaussian complexity of a lasso cone under an isotropic covariance.
/// Other (cone, covariance) pairs throw; use gamma_bound for those.
GammaEstimate gamma_estimate(const ConeSpec& cone, const CovarianceModel& cov, Index n_mc, std::uint64_t seed);

/// Upper bound on gamma(T, Sigma), reported with absolute constant 1.
struct GammaBound {
    double value = 0.0;
    std::string constant;  // "1" or "C(xi)"

    /// r_n = bound / sqrt(n)
    double rate(Index n) const;
};

GammaBound gamma_bound(const ConeSpec& cone, const CovarianceModel& cov);

/// Lower bound on min_{u in T, ||u|| = 1} ||Sigma^{1/2} u||. For a support cone
/// this is the exact value over vectors supported on S.
double phi_lower_bound(const ConeSpec& cone, const CovarianceModel& cov);

/// lasso_cone((2 C + 1) s)
ConeSpec sparse_cone_from_counts(Index s, double c_tilde);

/// Minimax rate scales: sqrt(2 s log(p/s) / n) and sqrt((s d + s log(M/s)) / n).
double rate_lasso(Index n, Index p, Index s);
double rate_group(Index n, Index d, Index m, Index s);

}  // namespace penex

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "penex/spd.hpp"

namespace penex {

enum class CovarianceKind { identity, ar1, explicit_matrix };
enum class DesignKind { gaussian, rademacher };
enum class ModelKind { linear, logistic };

std::string to_string(DesignKind kind);
std::string to_string(ModelKind kind);
DesignKind parse_design_kind(const std::string& s);
ModelKind parse_model_kind(const std::string& s);

/// sub-Gaussian parameter L recorded for a design kind.
double subgaussian_parameter(DesignKind kind);

/**
 * Population covariance Sigma of the design rows, with its symmetric square
 * root and inverse. Diagonal entries must not exceed one.
 */
class CovarianceModel {
public:
    static CovarianceModel identity(Index p);
    /// Sigma_ij = rho^|i-j|. rho == 0 yields the identity model.
    static CovarianceModel ar1(Index p, double rho);
    static CovarianceModel explicit_matrix(const MatrixXd& sigma);

    /// Parses "identity" or "ar1:<rho>".
    static CovarianceModel parse(const std::string& descriptor, Index p);

    CovarianceKind kind() const noexcept { return kind_; }
    double rho() const noexcept { return rho_; }
    Index dim() const noexcept { return matrix_.dim(); }
    const SpdMatrix& matrix() const noexcept { return matrix_; }
    bool is_identity() const noexcept { return kind_ == CovarianceKind::identity; }

    /// "identity", "ar1:<rho>" or "explicit".
    std::string describe() const;

private:
    CovarianceKind kind_ = CovarianceKind::identity;
    double rho_ = 0.0;
    SpdMatrix matrix_;
};

/// Equal-size disjoint groups partitioning {0, ..., p-1}.
class GroupStructure {
public:
    /// Contiguous blocks {0..d-1}, {d..2d-1}, ...
    static GroupStructure contiguous(Index p, Index group_size);
    /// Explicit groups; throws unless they partition {0..p-1} with equal sizes.
    static GroupStructure from_groups(Index p, std::vector<std::vector<Index>> groups);

    Index dim() const noexcept { return p_; }
    Index num_groups() const noexcept { return static_cast<Index>(groups_.size()); }
    Index group_size() const noexcept { return d_; }
    const std::vector<Index>& group(Index k) const { return groups_[static_cast<std::size_t>(k)]; }
    const std::vector<std::vector<Index>>& groups() const noexcept { return groups_; }

    double group_norm(const VectorXd& v, Index k) const;

private:
    Index p_ = 0;
    Index d_ = 0;
    std::vector<std::vector<Index>> groups_;
};

struct GroundTruth {
    VectorXd beta_star;
    std::vector<Index> support;
    Index sparsity = 0;
    std::optional<Index> group_sparsity;

    static GroundTruth from_vector(const VectorXd& beta, const GroupStructure* groups = nullptr);
};

/// s nonzero entries of magnitude `magnitude`, evenly spaced, alternating in sign.
GroundTruth sparse_ground_truth(Index p, Index s, double magnitude);

/// All coordinates of `s` evenly spaced groups set to +-magnitude (alternating per group).
GroundTruth group_sparse_ground_truth(const GroupStructure& groups, Index s, double magnitude);

struct Dataset {
    MatrixXd X;
    VectorXd y;
    ModelKind model_kind = ModelKind::linear;
    VectorXd noise;  // linear only
    std::uint64_t seed = 0;
    DesignKind design_kind = DesignKind::gaussian;
    VectorXd beta_star;
    double noise_sd = 0.0;
    std::string covariance = "unknown";

    Index n() const noexcept { return X.rows(); }
    Index p() const noexcept { return X.cols(); }
};

/// n x p design with iid rows Sigma^{1/2} g, g standard normal or Rademacher.
MatrixXd generate_design(const CovarianceModel& cov, Index n, DesignKind design_kind,
                         std::uint64_t seed);

/// y = X beta* + eps with eps iid N(0, noise_sd^2).
Dataset generate_linear(const MatrixXd& X, const VectorXd& beta_star, double noise_sd,
                        std::uint64_t seed);

/// Labels with P(Y = 1 | x) = 1 / (1 + exp(x^T beta*)).
Dataset generate_logistic(const MatrixXd& X, const VectorXd& beta_star, std::uint64_t seed);

/// sqrt(mean eps_i^2) from the stored noise. Throws on logistic data.
double sigma_star(const Dataset& data);

/// ||Sigma^{1/2} beta*|| <= 1 check used before quoting logistic constants.
bool logistic_signal_bounded(const CovarianceModel& cov, const VectorXd& beta_star);

}  // namespace penex

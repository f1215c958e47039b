#include "penex/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "penex/rng.hpp"

namespace penex {

std::string to_string(DesignKind kind)
{
    return kind == DesignKind::gaussian ? "gaussian" : "rademacher";
}

std::string to_string(ModelKind kind) { return kind == ModelKind::linear ? "linear" : "logistic"; }

DesignKind parse_design_kind(const std::string& s)
{
    if (s == "gaussian") return DesignKind::gaussian;
    if (s == "rademacher") return DesignKind::rademacher;
    throw std::invalid_argument("unknown design kind '" + s + "'");
}

ModelKind parse_model_kind(const std::string& s)
{
    if (s == "linear") return ModelKind::linear;
    if (s == "logistic") return ModelKind::logistic;
    throw std::invalid_argument("unknown model kind '" + s + "'");
}

double subgaussian_parameter(DesignKind /*kind*/) { return 1.0; }

// ---------------------------------------------------------------------------
// CovarianceModel

CovarianceModel CovarianceModel::identity(Index p)
{
    CovarianceModel out;
    out.kind_ = CovarianceKind::identity;
    out.matrix_ = SpdMatrix::scaled_identity(p, 1.0);
    return out;
}

CovarianceModel CovarianceModel::ar1(Index p, double rho)
{
    if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("ar1: rho must lie in (-1, 1)");
    if (rho == 0.0) return identity(p);
    MatrixXd sigma(p, p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
            sigma(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    CovarianceModel out;
    out.kind_ = CovarianceKind::ar1;
    out.rho_ = rho;
    out.matrix_ = SpdMatrix::from_dense(sigma);
    return out;
}

CovarianceModel CovarianceModel::explicit_matrix(const MatrixXd& sigma)
{
    if (sigma.rows() != sigma.cols()) throw std::invalid_argument("covariance must be square");
    if ((sigma.diagonal().array() > 1.0 + 1e-12).any())
        throw std::invalid_argument("covariance diagonal entries must be <= 1");
    CovarianceModel out;
    out.kind_ = CovarianceKind::explicit_matrix;
    out.matrix_ = SpdMatrix::from_dense(sigma);
    return out;
}

CovarianceModel CovarianceModel::parse(const std::string& descriptor, Index p)
{
    if (descriptor == "identity") return identity(p);
    if (descriptor.rfind("ar1:", 0) == 0) {
        std::size_t used = 0;
        const std::string tail = descriptor.substr(4);
        const double rho = std::stod(tail, &used);
        if (used != tail.size()) throw std::invalid_argument("bad ar1 descriptor '" + descriptor + "'");
        return ar1(p, rho);
    }
    throw std::invalid_argument("unknown covariance descriptor '" + descriptor + "'");
}

std::string CovarianceModel::describe() const
{
    switch (kind_) {
    case CovarianceKind::identity: return "identity";
    // shortest round-trip form
    case CovarianceKind::ar1: return fmt::format("ar1:{}", rho_);
    case CovarianceKind::explicit_matrix: return "explicit";
    }
    return "explicit";
}

// ---------------------------------------------------------------------------
// GroupStructure

GroupStructure GroupStructure::contiguous(Index p, Index group_size)
{
    if (group_size < 1 || p < 1 || p % group_size != 0)
        throw std::invalid_argument("group size must divide p");
    std::vector<std::vector<Index>> groups(static_cast<std::size_t>(p / group_size));
    for (Index j = 0; j < p; ++j) groups[static_cast<std::size_t>(j / group_size)].push_back(j);
    return from_groups(p, std::move(groups));
}

GroupStructure GroupStructure::from_groups(Index p, std::vector<std::vector<Index>> groups)
{
    if (groups.empty()) throw std::invalid_argument("at least one group required");
    const auto d = static_cast<Index>(groups.front().size());
    if (d < 1) throw std::invalid_argument("groups must be non-empty");
    std::vector<int> seen(static_cast<std::size_t>(p), 0);
    for (const auto& g : groups) {
        if (static_cast<Index>(g.size()) != d) throw std::invalid_argument("groups must have equal size");
        for (Index j : g) {
            if (j < 0 || j >= p) throw std::invalid_argument("group index out of range");
            if (seen[static_cast<std::size_t>(j)]++) throw std::invalid_argument("groups overlap");
        }
    }
    if (std::any_of(seen.begin(), seen.end(), [](int c) { return c == 0; }))
        throw std::invalid_argument("groups do not cover every index");
    GroupStructure out;
    out.p_ = p;
    out.d_ = d;
    out.groups_ = std::move(groups);
    return out;
}

double GroupStructure::group_norm(const VectorXd& v, Index k) const
{
    double acc = 0.0;
    for (Index j : group(k)) acc += v(j) * v(j);
    return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Ground truth

GroundTruth GroundTruth::from_vector(const VectorXd& beta, const GroupStructure* groups)
{
    GroundTruth gt;
    gt.beta_star = beta;
    for (Index j = 0; j < beta.size(); ++j)
        if (beta(j) != 0.0) gt.support.push_back(j);
    gt.sparsity = static_cast<Index>(gt.support.size());
    if (groups) {
        Index count = 0;
        for (Index k = 0; k < groups->num_groups(); ++k)
            if (groups->group_norm(beta, k) != 0.0) ++count;
        gt.group_sparsity = count;
    }
    return gt;
}

GroundTruth sparse_ground_truth(Index p, Index s, double magnitude)
{
    if (s < 0 || s > p) throw std::invalid_argument("sparsity must lie in [0, p]");
    VectorXd beta = VectorXd::Zero(p);
    for (Index k = 0; k < s; ++k) beta(k * (p / std::max<Index>(s, 1))) = (k % 2 == 0 ? 1.0 : -1.0) * magnitude;
    return GroundTruth::from_vector(beta);
}

GroundTruth group_sparse_ground_truth(const GroupStructure& groups, Index s, double magnitude)
{
    const Index m = groups.num_groups();
    if (s < 0 || s > m) throw std::invalid_argument("group sparsity must lie in [0, M]");
    VectorXd beta = VectorXd::Zero(groups.dim());
    for (Index k = 0; k < s; ++k) {
        const double sign = k % 2 == 0 ? 1.0 : -1.0;
        for (Index j : groups.group(k * (m / std::max<Index>(s, 1)))) beta(j) = sign * magnitude;
    }
    return GroundTruth::from_vector(beta, &groups);
}

// ---------------------------------------------------------------------------
// Data generation

MatrixXd generate_design(const CovarianceModel& cov, Index n, DesignKind design_kind,
                         std::uint64_t seed)
{
    if (n < 1) throw std::invalid_argument("generate_design: n must be >= 1");
    const Index p = cov.dim();
    Engine engine = make_engine(seed, Stream::design);
    MatrixXd g(n, p);
    if (design_kind == DesignKind::gaussian) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j) g(i, j) = normal(engine);
    } else {
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j) g(i, j) = (engine() >> 63) ? 1.0 : -1.0;
    }
    if (cov.is_identity()) return g;
    return cov.matrix().right_multiply_sqrt(g);
}

Dataset generate_linear(const MatrixXd& X, const VectorXd& beta_star, double noise_sd,
                        std::uint64_t seed)
{
    if (X.cols() != beta_star.size()) throw std::invalid_argument("generate_linear: dimension mismatch");
    if (!(noise_sd >= 0.0)) throw std::invalid_argument("generate_linear: noise_sd must be >= 0");
    Engine engine = make_engine(seed, Stream::noise);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset d;
    d.X = X;
    d.noise.resize(X.rows());
    for (Index i = 0; i < X.rows(); ++i) d.noise(i) = noise_sd * normal(engine);
    d.y = X * beta_star + d.noise;
    d.model_kind = ModelKind::linear;
    d.seed = seed;
    d.beta_star = beta_star;
    d.noise_sd = noise_sd;
    return d;
}

Dataset generate_logistic(const MatrixXd& X, const VectorXd& beta_star, std::uint64_t seed)
{
    if (X.cols() != beta_star.size()) throw std::invalid_argument("generate_logistic: dimension mismatch");
    Engine engine = make_engine(seed, Stream::labels);
    const VectorXd eta = X * beta_star;
    Dataset d;
    d.X = X;
    d.y.resize(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        // P(Y=1) = 1/(1+e^u); written to avoid overflow for large |u|.
        const double u = eta(i);
        const double prob = u >= 0 ? std::exp(-u) / (1.0 + std::exp(-u)) : 1.0 / (1.0 + std::exp(u));
        const double draw = std::generate_canonical<double, 53>(engine);
        d.y(i) = draw < prob ? 1.0 : 0.0;
    }
    d.model_kind = ModelKind::logistic;
    d.seed = seed;
    d.beta_star = beta_star;
    return d;
}

double sigma_star(const Dataset& data)
{
    if (data.model_kind != ModelKind::linear)
        throw std::invalid_argument("sigma_star: only defined for linear datasets with stored noise");
    if (data.noise.size() == 0) throw std::invalid_argument("sigma_star: dataset has no stored noise");
    return std::sqrt(data.noise.squaredNorm() / static_cast<double>(data.noise.size()));
}

bool logistic_signal_bounded(const CovarianceModel& cov, const VectorXd& beta_star)
{
    return cov.matrix().norm(beta_star) <= 1.0 + 1e-12;
}

}  // namespace penex

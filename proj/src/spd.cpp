#include "penex/spd.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace penex {

SpdMatrix SpdMatrix::scaled_identity(Index dim, double scale)
{
    if (dim < 1) throw std::invalid_argument("SpdMatrix: dimension must be positive");
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw std::invalid_argument("SpdMatrix: scale must be positive and finite");
    SpdMatrix out;
    out.dim_ = dim;
    out.scale_ = scale;
    return out;
}

SpdMatrix SpdMatrix::from_dense(const MatrixXd& m)
{
    if (m.rows() != m.cols() || m.rows() < 1)
        throw std::invalid_argument("SpdMatrix: matrix must be square and non-empty");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    const double mag = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (!(asym <= 1e-12 * mag)) throw std::invalid_argument("SpdMatrix: matrix is not symmetric");

    const MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) throw std::invalid_argument("SpdMatrix: eigendecomposition failed");
    const VectorXd& ev = eig.eigenvalues();
    if (!(ev(0) > 0.0))
        throw std::invalid_argument("SpdMatrix: matrix is not positive definite (smallest eigenvalue " +
                                    std::to_string(ev(0)) + ")");

    const MatrixXd& q = eig.eigenvectors();
    auto dense = std::make_shared<Dense>();
    dense->matrix = sym;
    dense->eigenvalues = ev;
    dense->sqrt = q * ev.cwiseSqrt().asDiagonal() * q.transpose();
    dense->inverse = q * ev.cwiseInverse().asDiagonal() * q.transpose();
    dense->inverse_sqrt = q * ev.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();

    SpdMatrix out;
    out.dim_ = m.rows();
    out.dense_ = std::move(dense);
    return out;
}

double SpdMatrix::lambda_min() const { return dense_ ? dense_->eigenvalues(0) : scale_; }

double SpdMatrix::lambda_max() const
{
    return dense_ ? dense_->eigenvalues(dim_ - 1) : scale_;
}

VectorXd SpdMatrix::eigenvalues() const
{
    return dense_ ? dense_->eigenvalues : VectorXd::Constant(dim_, scale_);
}

MatrixXd SpdMatrix::dense() const
{
    return dense_ ? dense_->matrix : MatrixXd(scale_ * MatrixXd::Identity(dim_, dim_));
}

MatrixXd SpdMatrix::dense_sqrt() const
{
    return dense_ ? dense_->sqrt : MatrixXd(std::sqrt(scale_) * MatrixXd::Identity(dim_, dim_));
}

MatrixXd SpdMatrix::dense_inverse() const
{
    return dense_ ? dense_->inverse : MatrixXd(MatrixXd::Identity(dim_, dim_) / scale_);
}

VectorXd SpdMatrix::apply(const VectorXd& v) const
{
    return dense_ ? VectorXd(dense_->matrix * v) : VectorXd(scale_ * v);
}

VectorXd SpdMatrix::apply_sqrt(const VectorXd& v) const
{
    return dense_ ? VectorXd(dense_->sqrt * v) : VectorXd(std::sqrt(scale_) * v);
}

VectorXd SpdMatrix::apply_inverse(const VectorXd& v) const
{
    return dense_ ? VectorXd(dense_->inverse * v) : VectorXd(v / scale_);
}

VectorXd SpdMatrix::apply_inverse_sqrt(const VectorXd& v) const
{
    return dense_ ? VectorXd(dense_->inverse_sqrt * v) : VectorXd(v / std::sqrt(scale_));
}

MatrixXd SpdMatrix::right_multiply_sqrt(const MatrixXd& g) const
{
    if (!dense_) {
        if (scale_ == 1.0) return g;
        return std::sqrt(scale_) * g;
    }
    return g * dense_->sqrt;
}

double SpdMatrix::quad_form(const VectorXd& u) const
{
    return dense_ ? u.dot(dense_->matrix * u) : scale_ * u.squaredNorm();
}

double SpdMatrix::norm(const VectorXd& u) const { return std::sqrt(std::max(0.0, quad_form(u))); }

SpdMatrix SpdMatrix::restrict_to(const std::vector<Index>& indices) const
{
    const Index k = static_cast<Index>(indices.size());
    if (!dense_) return scaled_identity(k, scale_);
    MatrixXd sub(k, k);
    for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) sub(a, b) = dense_->matrix(indices[a], indices[b]);
    return from_dense(sub);
}

}  // namespace penex

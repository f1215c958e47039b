#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace penex {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/**
 * Symmetric positive definite matrix with cached square root and inverse.
 *
 * Two representations: a scaled identity c*I (no storage, used for large
 * isotropic problems) or a dense matrix carrying its symmetric
 * eigendecomposition. Instances are immutable and cheap to copy.
 */
class SpdMatrix {
public:
    SpdMatrix() = default;

    static SpdMatrix scaled_identity(Index dim, double scale);

    /// Throws std::invalid_argument unless `m` is symmetric with smallest eigenvalue > 0.
    static SpdMatrix from_dense(const MatrixXd& m);

    Index dim() const noexcept { return dim_; }
    bool is_scaled_identity() const noexcept { return dense_ == nullptr; }
    double scale() const noexcept { return scale_; }

    double lambda_min() const;
    double lambda_max() const;
    VectorXd eigenvalues() const;

    MatrixXd dense() const;
    MatrixXd dense_sqrt() const;
    MatrixXd dense_inverse() const;

    VectorXd apply(const VectorXd& v) const;
    VectorXd apply_sqrt(const VectorXd& v) const;
    VectorXd apply_inverse(const VectorXd& v) const;
    VectorXd apply_inverse_sqrt(const VectorXd& v) const;

    /// Returns g * A^{1/2}; rows of g become rows transformed by the symmetric root.
    MatrixXd right_multiply_sqrt(const MatrixXd& g) const;

    double quad_form(const VectorXd& u) const;
    double norm(const VectorXd& u) const;

    /// Principal submatrix on `indices`, as a new SpdMatrix.
    SpdMatrix restrict_to(const std::vector<Index>& indices) const;

private:
    struct Dense {
        MatrixXd matrix;
        MatrixXd sqrt;
        MatrixXd inverse;
        MatrixXd inverse_sqrt;
        VectorXd eigenvalues;  // ascending
    };

    Index dim_ = 0;
    double scale_ = 1.0;
    std::shared_ptr<const Dense> dense_;
};

}  // namespace penex

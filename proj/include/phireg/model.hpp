#pragma once

#include <Eigen/Dense>

namespace phireg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Smallest probability handed to any log or negative power downstream.
inline constexpr double kProbabilityFloor = 1e-300;

/// Regression coefficients of the baseline-category logit model.
///
/// Row r holds the coefficients (intercept first) of category r + 1; the last
/// category d + 1 is the baseline and carries no row. The flattened parameter
/// vector is row-major: every coefficient of category 1, then category 2, ...
class BetaMatrix {
public:
    BetaMatrix() = default;
    BetaMatrix(Index free_categories, Index covariates);
    explicit BetaMatrix(Matrix coefficients);

    static BetaMatrix from_flat(const Vector& flat, Index free_categories, Index covariates);

    Vector flatten() const;

    const Matrix& coefficients() const noexcept { return coef_; }
    double operator()(Index r, Index j) const { return coef_(r, j); }

    /// d, the number of non-baseline categories.
    Index free_categories() const noexcept { return coef_.rows(); }
    /// k + 1, covariates including the intercept.
    Index covariates() const noexcept { return coef_.cols(); }
    /// d (k + 1).
    Index size() const noexcept { return coef_.size(); }

private:
    Matrix coef_;
};

/// Category probabilities of one cluster. Entries lie in [kProbabilityFloor, 1]
/// and sum to one.
class CategoryProbs {
public:
    explicit CategoryProbs(Vector probs);

    const Vector& values() const noexcept { return p_; }
    double operator[](Index s) const { return p_(s); }
    Index size() const noexcept { return p_.size(); }
    /// Leading d entries (baseline dropped).
    Vector free() const { return p_.head(p_.size() - 1); }

private:
    Vector p_;
};

/// Multinomial-logit link. Uses max subtraction so large |x'beta| cannot overflow.
CategoryProbs link(const BetaMatrix& beta, const Vector& x);

/// diag(pi) - pi pi'.
Matrix delta_matrix(const CategoryProbs& pi);

/// d(k+1) x (d+1) Jacobian of pi' with respect to the flattened beta:
/// (I_d, 0) Delta(pi) (x) x.
Matrix dpi_dbeta(const BetaMatrix& beta, const Vector& x);

/// Same Jacobian from an already evaluated probability vector.
Matrix dpi_dbeta(const CategoryProbs& pi, const Vector& x);

}  // namespace phireg

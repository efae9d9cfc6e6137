#include "phireg/model.hpp"

#include <algorithm>
#include <cmath>

#include "phireg/errors.hpp"

namespace phireg {

namespace {

bool all_finite(const Eigen::Ref<const Matrix>& m) {
    return m.allFinite();
}

}  // namespace

BetaMatrix::BetaMatrix(Index free_categories, Index covariates)
    : coef_(Matrix::Zero(free_categories, covariates)) {
    if (free_categories < 1 || covariates < 1)
        throw DimensionError("beta needs at least one free category and one covariate");
}

BetaMatrix::BetaMatrix(Matrix coefficients) : coef_(std::move(coefficients)) {
    if (coef_.rows() < 1 || coef_.cols() < 1)
        throw DimensionError("beta needs at least one free category and one covariate");
    if (!all_finite(coef_)) throw DomainError("beta has non-finite entries");
}

BetaMatrix BetaMatrix::from_flat(const Vector& flat, Index free_categories, Index covariates) {
    if (free_categories < 1 || covariates < 1 || flat.size() != free_categories * covariates)
        throw DimensionError("flat beta of length " + std::to_string(flat.size()) +
                             " does not match d=" + std::to_string(free_categories) +
                             ", k+1=" + std::to_string(covariates));
    Matrix coef(free_categories, covariates);
    for (Index r = 0; r < free_categories; ++r)
        for (Index j = 0; j < covariates; ++j) coef(r, j) = flat(r * covariates + j);
    return BetaMatrix(std::move(coef));
}

Vector BetaMatrix::flatten() const {
    Vector flat(coef_.size());
    for (Index r = 0; r < coef_.rows(); ++r)
        for (Index j = 0; j < coef_.cols(); ++j) flat(r * coef_.cols() + j) = coef_(r, j);
    return flat;
}

CategoryProbs::CategoryProbs(Vector probs) : p_(std::move(probs)) {
    if (p_.size() < 2) throw DimensionError("need at least two categories");
    if (!p_.allFinite() || (p_.array() < 0.0).any() || (p_.array() > 1.0).any())
        throw DomainError("category probabilities must lie in [0, 1]");
    if (std::abs(p_.sum() - 1.0) > 1e-12) throw DomainError("category probabilities must sum to 1");
    p_ = p_.cwiseMax(kProbabilityFloor);
}

CategoryProbs link(const BetaMatrix& beta, const Vector& x) {
    if (x.size() != beta.covariates())
        throw DimensionError("covariate vector has length " + std::to_string(x.size()) +
                             ", expected " + std::to_string(beta.covariates()));
    if (!x.allFinite()) throw DomainError("covariate vector has non-finite entries");

    const Index d = beta.free_categories();
    Vector eta(d + 1);
    eta.head(d) = beta.coefficients() * x;
    eta(d) = 0.0;
    if (!eta.allFinite()) throw DomainError("linear predictor is not finite");

    const double shift = eta.maxCoeff();
    Vector e = (eta.array() - shift).exp();
    Vector p = e / e.sum();
    // Renormalise after flooring so the sum stays exact to rounding.
    p = p.cwiseMax(kProbabilityFloor);
    p /= p.sum();
    return CategoryProbs(std::move(p));
}

Matrix delta_matrix(const CategoryProbs& pi) {
    const Vector& p = pi.values();
    Matrix delta = -p * p.transpose();
    delta.diagonal() += p;
    return delta;
}

Matrix dpi_dbeta(const CategoryProbs& pi, const Vector& x) {
    const Index d = pi.size() - 1;
    const Index k1 = x.size();
    const Matrix delta = delta_matrix(pi);
    Matrix jac(d * k1, d + 1);
    for (Index r = 0; r < d; ++r)
        for (Index j = 0; j < k1; ++j) jac.row(r * k1 + j) = delta.row(r) * x(j);
    return jac;
}

Matrix dpi_dbeta(const BetaMatrix& beta, const Vector& x) {
    return dpi_dbeta(link(beta, x), x);
}

}  // namespace phireg

#include "phireg/inference.hpp"

#include <cmath>
#include <limits>

#include "phireg/detail/text.hpp"
#include "phireg/distributions.hpp"
#include "phireg/errors.hpp"

namespace phireg {

LinearHypothesis::LinearHypothesis(Matrix M, Vector m) : M_(std::move(M)), m_(std::move(m)) {
    if (M_.cols() < 1 || M_.rows() < M_.cols())
        throw DimensionError("hypothesis matrix must be d(k+1) x r with 1 <= r <= d(k+1)");
    if (m_.size() != M_.cols())
        throw DimensionError("hypothesis vector m has " + std::to_string(m_.size()) + " entries, M has " +
                             std::to_string(M_.cols()) + " columns");
    if (!M_.allFinite() || !m_.allFinite()) throw DomainError("hypothesis has non-finite entries");
    Eigen::ColPivHouseholderQR<Matrix> qr(M_);
    qr.setThreshold(1e-10);
    if (qr.rank() != M_.cols())
        throw ValidationError("hypothesis matrix has rank " + std::to_string(qr.rank()) + ", needs " +
                              std::to_string(M_.cols()));
}

LinearHypothesis LinearHypothesis::coordinate(Index parameters, Index index, double value) {
    if (index < 0 || index >= parameters) throw DimensionError("hypothesis coordinate out of range");
    Matrix M = Matrix::Zero(parameters, 1);
    M(index, 0) = 1.0;
    return LinearHypothesis(std::move(M), Vector::Constant(1, value));
}

namespace {

// x' [M'VM]^{-1} x with a rank check on M'VM.
double restricted_quadratic(const LinearHypothesis& hyp, const Matrix& V, const Vector& x) {
    if (V.rows() != hyp.parameters() || V.cols() != hyp.parameters())
        throw DimensionError("covariance matrix does not match the hypothesis dimension");
    Matrix S = hyp.M().transpose() * V * hyp.M();
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
    const Vector& values = eig.eigenvalues();
    const double top = values.cwiseAbs().maxCoeff();
    Index rank = 0;
    for (Index i = 0; i < values.size(); ++i)
        if (values(i) > top * 1e-12) ++rank;
    if (!(top > 0.0) || rank < values.size())
        throw RankDeficiencyError("M'VM is singular: numerical rank " + std::to_string(rank) + " of " +
                                      std::to_string(values.size()),
                                  eig.eigenvectors().col(0));
    const Vector z = eig.eigenvectors().transpose() * x;
    return z.cwiseQuotient(values).dot(z);
}

Vector restriction_gap(const Vector& beta, const LinearHypothesis& hyp) {
    if (beta.size() != hyp.parameters()) throw DimensionError("beta does not match the hypothesis dimension");
    return hyp.M().transpose() * beta - hyp.m();
}

}  // namespace

double wald_statistic(const Vector& beta_hat, const Matrix& V, Index n, const LinearHypothesis& hyp) {
    if (n < 1) throw DomainError("number of clusters must be positive");
    const double w = static_cast<double>(n) * restricted_quadratic(hyp, V, restriction_gap(beta_hat, hyp));
    return std::max(w, 0.0);
}

WaldReport wald_test(const FitResult& fit, const LinearHypothesis& hyp, double alpha) {
    if (!fit.converged) throw ConvergenceError("refusing a Wald test on a non-converged fit");
    if (fit.V_hat.size() == 0) throw NumericalError("fit carries no covariance estimate");
    WaldReport report;
    report.alpha = alpha;
    report.df = hyp.rank();
    report.statistic = wald_statistic(fit.beta_hat.flatten(), fit.V_hat, fit.n_clusters, hyp);
    report.p_value = dist::chi2_sf(report.statistic, static_cast<double>(report.df));
    report.reject = report.statistic > dist::chi2_upper_quantile(static_cast<double>(report.df), alpha);
    for (double level : {0.01, 0.05, 0.10, alpha})
        report.reject_at[level] =
            report.statistic > dist::chi2_upper_quantile(static_cast<double>(report.df), level);
    return report;
}

double ell_star(const Vector& beta1, const LinearHypothesis& hyp, const Matrix& V) {
    return std::max(0.0, restricted_quadratic(hyp, V, restriction_gap(beta1, hyp)));
}

double sigma_w_sq(const Vector& beta0, const LinearHypothesis& hyp, const Matrix& V) {
    return 4.0 * ell_star(beta0, hyp, V);
}

double approximate_power(double ell, double sigma_w, double df, Index n, double alpha) {
    if (!(sigma_w > 0.0))
        throw DomainError(
            "power approximation undefined at the null (sigma_W = 0); use the noncentral chi-square "
            "limit under contiguous alternatives");
    if (n < 1) throw DomainError("sample size must be positive");
    const double root_n = std::sqrt(static_cast<double>(n));
    const double crit = dist::chi2_upper_quantile(df, alpha);
    const double arg = (crit / root_n - root_n * ell) / sigma_w;
    return dist::normal_cdf(-arg);
}

double approximate_power(const Vector& beta0, const LinearHypothesis& hyp, const Matrix& V, Index n,
                         double alpha) {
    const double ell = ell_star(beta0, hyp, V);
    return approximate_power(ell, std::sqrt(4.0 * ell), static_cast<double>(hyp.rank()), n, alpha);
}

Index required_sample_size(double ell, double sigma_w, double df, double alpha, double target_power) {
    if (!(ell > 0.0))
        throw DomainError("beta0 satisfies the null hypothesis (ell* = 0); no sample size reaches the power");
    if (!(target_power > 0.0 && target_power < 1.0)) throw DomainError("target power must lie in (0, 1)");
    if (!(sigma_w >= 0.0)) throw DomainError("sigma_W must be nonnegative");
    const double z = dist::normal_quantile(1.0 - target_power);
    const double A = sigma_w * sigma_w * z * z;
    const double B = 2.0 * ell * dist::chi2_upper_quantile(df, alpha);
    const double n = (A + B + std::sqrt(A * (A + 2.0 * B))) / (2.0 * ell * ell);
    if (!(n < 9e18)) throw DomainError("required sample size overflows");
    return static_cast<Index>(std::floor(n)) + 1;
}

Index required_sample_size(const Vector& beta0, const LinearHypothesis& hyp, const Matrix& V, double alpha,
                           double target_power) {
    const double ell = ell_star(beta0, hyp, V);
    return required_sample_size(ell, std::sqrt(4.0 * ell), static_cast<double>(hyp.rank()), alpha, target_power);
}

double noncentrality(const LinearHypothesis& hyp, const Matrix& V, const Vector& direction) {
    if (direction.size() != hyp.parameters()) throw DimensionError("direction does not match the hypothesis");
    return std::max(0.0, restricted_quadratic(hyp, V, hyp.M().transpose() * direction));
}

double noncentrality_shifted(const LinearHypothesis& hyp, const Matrix& V, const Vector& delta) {
    if (delta.size() != hyp.rank()) throw DimensionError("delta must have one entry per restriction");
    return std::max(0.0, restricted_quadratic(hyp, V, delta));
}

}  // namespace phireg

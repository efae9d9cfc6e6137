#pragma once

#include <map>

#include "phireg/estimator.hpp"
#include "phireg/model.hpp"

namespace phireg {

/// Linear null hypothesis M' beta = m on the flattened (row-major) beta.
class LinearHypothesis {
public:
    /// M is d(k+1) x r of full column rank; m has r entries.
    LinearHypothesis(Matrix M, Vector m);

    /// H0: beta_flat[index] == value.
    static LinearHypothesis coordinate(Index parameters, Index index, double value);

    const Matrix& M() const noexcept { return M_; }
    const Vector& m() const noexcept { return m_; }
    Index rank() const noexcept { return M_.cols(); }
    Index parameters() const noexcept { return M_.rows(); }

private:
    Matrix M_;
    Vector m_;
};

struct WaldReport {
    double statistic = 0.0;
    Index df = 0;
    double p_value = 1.0;
    double alpha = 0.05;
    bool reject = false;
    /// Decision at alpha and at the conventional 0.01, 0.05, 0.10 levels.
    std::map<double, bool> reject_at;
};

/// n (M'b - m)' [M'VM]^{-1} (M'b - m).
double wald_statistic(const Vector& beta_hat, const Matrix& V, Index n, const LinearHypothesis& hyp);

/// Wald-type test from a converged fit; refuses (ConvergenceError) otherwise.
/// Rejects when the statistic exceeds the upper-alpha chi-square quantile.
WaldReport wald_test(const FitResult& fit, const LinearHypothesis& hyp, double alpha = 0.05);

/// (M'b1 - m)' [M'VM]^{-1} (M'b1 - m).
double ell_star(const Vector& beta1, const LinearHypothesis& hyp, const Matrix& V);

/// 4 ell_star(beta0, beta0).
double sigma_w_sq(const Vector& beta0, const LinearHypothesis& hyp, const Matrix& V);

/// 1 - Phi((chi2_{r,alpha}/sqrt(n) - sqrt(n) ell*) / sigma_W) at a fixed
/// alternative beta0 (M'beta0 != m).
double approximate_power(const Vector& beta0, const LinearHypothesis& hyp, const Matrix& V, Index n,
                         double alpha);
/// Scalar form on (ell*, sigma_W, r).
double approximate_power(double ell, double sigma_w, double df, Index n, double alpha);

/// Smallest planning n from
///   floor((A + B + sqrt(A (A + 2B))) / (2 ell*^2)) + 1,
///   A = sigma_W^2 Phi^{-1}(1 - target)^2,  B = 2 ell* chi2_{r,alpha}.
Index required_sample_size(const Vector& beta0, const LinearHypothesis& hyp, const Matrix& V, double alpha,
                           double target_power);
Index required_sample_size(double ell, double sigma_w, double df, double alpha, double target_power);

/// Noncentrality d' M [M'VM]^{-1} M' d of the limiting chi-square under
/// beta_n = beta_0 + d / sqrt(n).
double noncentrality(const LinearHypothesis& hyp, const Matrix& V, const Vector& direction);

/// Noncentrality under M' beta_n - m = delta / sqrt(n): delta' [M'VM]^{-1} delta.
/// Equals `noncentrality` whenever delta = M' d.
double noncentrality_shifted(const LinearHypothesis& hyp, const Matrix& V, const Vector& delta);

}  // namespace phireg

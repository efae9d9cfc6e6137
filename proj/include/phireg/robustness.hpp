#pragma once

#include <optional>

#include "phireg/divergence.hpp"
#include "phireg/inference.hpp"
#include "phireg/model.hpp"
#include "phireg/survey_data.hpp"

namespace phireg {

/// Point-mass contamination of cluster (h0, i0) at the one-hot outcome t.
class ContaminationPoint {
public:
    /// `t` must be a 0/1 vector with exactly one 1.
    ContaminationPoint(long stratum, long cluster, Vector t);
    static ContaminationPoint at_category(long stratum, long cluster, Index categories, Index category);

    long stratum() const noexcept { return stratum_; }
    long cluster() const noexcept { return cluster_; }
    const Vector& t() const noexcept { return t_; }
    /// Zero-based index of the 1 in t.
    Index category() const noexcept { return category_; }

private:
    long stratum_;
    long cluster_;
    Vector t_;
    Index category_;
};

struct InfluenceReport {
    Vector if_vector;
    Matrix psi;
    Vector u_star;
    /// Second-order influence of the Wald functional, when a hypothesis was given.
    std::optional<double> if2_wald;
};

/// Psi_{n,lambda}(beta0) = sum w m dpi'/dbeta diag^{-(lambda+2)}(pi) diag(pi^{lambda+1}) dpi/dbeta'.
///
/// The term carrying d^2 pi'/dbeta dbeta' is dropped: it multiplies
/// diag^{-(lambda+1)}(pi) pi^{lambda+1} = 1 and the second derivatives of
/// sum_s pi_s = 1 vanish. What remains is sum w m Delta(pi*) (x) x x', free of lambda.
Matrix psi_matrix(const SurveyDataset& data, const BetaMatrix& beta0, CressieReadLambda lambda);

/// -d/dbeta of the summed estimating function with counts frozen at their
/// model expectation m pi(beta0), by central differences. Cross-checks psi_matrix.
Matrix psi_matrix_numeric(const SurveyDataset& data, const BetaMatrix& beta0, CressieReadLambda lambda,
                          double step = 1e-6);

/// u*_{h0 i0} = w m Delta*(pi) diag^{-(lambda+1)}(pi) delta_t^{lambda+1} (x) x.
Vector contamination_score(const ClusterRecord& record, const BetaMatrix& beta0, CressieReadLambda lambda,
                           Index category);

/// First-order influence Psi^{-1} u* of the estimator functional at beta0
/// under contamination `point`; with `hyp` and `V` also the second-order
/// influence of the Wald functional.
InfluenceReport influence(const SurveyDataset& data, const BetaMatrix& beta0, CressieReadLambda lambda,
                          const ContaminationPoint& point, const LinearHypothesis* hyp = nullptr,
                          const Matrix* V = nullptr);

/// 2 IF' M [M'VM]^{-1} M' IF.
double influence2_wald(const Vector& if_vector, const LinearHypothesis& hyp, const Matrix& V);

}  // namespace phireg

#include "phireg/robustness.hpp"

#include <cmath>
#include <limits>

#include "phireg/detail/text.hpp"
#include "phireg/errors.hpp"
#include "phireg/estimator.hpp"

namespace phireg {

ContaminationPoint::ContaminationPoint(long stratum, long cluster, Vector t)
    : stratum_(stratum), cluster_(cluster), t_(std::move(t)), category_(-1) {
    Index ones = 0;
    for (Index s = 0; s < t_.size(); ++s) {
        if (t_(s) == 1.0) {
            ++ones;
            category_ = s;
        } else if (t_(s) != 0.0) {
            throw ValidationError("contamination point t must be a 0/1 vector");
        }
    }
    if (ones != 1) throw ValidationError("contamination point t must contain exactly one 1");
}

ContaminationPoint ContaminationPoint::at_category(long stratum, long cluster, Index categories, Index category) {
    if (category < 0 || category >= categories) throw DimensionError("contamination category out of range");
    Vector t = Vector::Zero(categories);
    t(category) = 1.0;
    return ContaminationPoint(stratum, cluster, std::move(t));
}

Matrix psi_matrix(const SurveyDataset& data, const BetaMatrix& beta0, CressieReadLambda /*lambda*/) {
    const Index p = beta0.size();
    Matrix psi = Matrix::Zero(p, p);
    for (const auto& r : data.records()) {
        const CategoryProbs pi = link(beta0, r.covariates);
        const Matrix D = dpi_dbeta(pi, r.covariates);
        // diag^{-(lambda+2)}(pi) pi^{lambda+1} collapses to diag^{-1}(pi).
        psi += r.weight * r.size * (D * pi.values().cwiseInverse().asDiagonal() * D.transpose());
    }
    return 0.5 * (psi + psi.transpose());
}

Matrix psi_matrix_numeric(const SurveyDataset& data, const BetaMatrix& beta0, CressieReadLambda lambda,
                          double step) {
    std::vector<ClusterRecord> frozen = data.records();
    for (auto& r : frozen) r.counts = r.size * link(beta0, r.covariates).values();
    const SurveyDataset expected(std::move(frozen));

    const Vector b = beta0.flatten();
    const Index p = b.size();
    Matrix jac(p, p);
    for (Index j = 0; j < p; ++j) {
        Vector up = b, down = b;
        up(j) += step;
        down(j) -= step;
        const Vector su = estimating_function(lambda, expected, BetaMatrix::from_flat(up, beta0.free_categories(), beta0.covariates()));
        const Vector sd = estimating_function(lambda, expected, BetaMatrix::from_flat(down, beta0.free_categories(), beta0.covariates()));
        jac.col(j) = -(su - sd) / (2.0 * step);
    }
    return jac;
}

Vector contamination_score(const ClusterRecord& record, const BetaMatrix& beta0, CressieReadLambda lambda,
                           Index category) {
    const CategoryProbs pi = link(beta0, record.covariates);
    const Index d = pi.size() - 1;
    if (category < 0 || category > d) throw DimensionError("contamination category out of range");
    // delta_t^{lambda+1} = delta_t for a one-hot t, and
    // Delta*(pi) diag^{-(lambda+1)}(pi) e_t = pi_t^{-lambda} (e*_t - pi*).
    Vector residual = -pi.free();
    if (category < d) residual(category) += 1.0;
    const double scale = lambda.is_kl() ? 1.0 : std::pow(pi[category], -lambda.value());
    const Vector& x = record.covariates;
    Vector u(d * x.size());
    for (Index r = 0; r < d; ++r) u.segment(r * x.size(), x.size()) = residual(r) * x;
    return record.weight * record.size * scale * u;
}

InfluenceReport influence(const SurveyDataset& data, const BetaMatrix& beta0, CressieReadLambda lambda,
                          const ContaminationPoint& point, const LinearHypothesis* hyp, const Matrix* V) {
    if (beta0.free_categories() + 1 != data.num_categories() || beta0.covariates() != data.num_covariates())
        throw DimensionError("beta does not match the dataset dimensions");
    if (point.t().size() != data.num_categories())
        throw DimensionError("contamination point has the wrong number of categories");
    const auto where = data.find(point.stratum(), point.cluster());
    if (!where)
        throw ValidationError("no cluster (h=" + std::to_string(point.stratum()) +
                              ", i=" + std::to_string(point.cluster()) + ") in the dataset");

    InfluenceReport report;
    report.psi = psi_matrix(data, beta0, lambda);
    report.u_star = contamination_score(data[*where], beta0, lambda, point.category());

    Eigen::SelfAdjointEigenSolver<Matrix> eig(report.psi);
    const Vector& values = eig.eigenvalues();
    const double top = values.cwiseAbs().maxCoeff();
    const double condition = values(0) > 0.0 ? top / values(0) : std::numeric_limits<double>::infinity();
    if (!(condition <= kMaxCondition))
        throw IllConditionedError("Psi is singular (condition estimate " + detail::format_real(condition) + ")",
                                  condition);
    const Matrix& Q = eig.eigenvectors();
    report.if_vector = Q * (Q.transpose() * report.u_star).cwiseQuotient(values);

    if (hyp) {
        if (!V) throw ValidationError("second-order Wald influence needs a covariance matrix");
        report.if2_wald = influence2_wald(report.if_vector, *hyp, *V);
    }
    return report;
}

double influence2_wald(const Vector& if_vector, const LinearHypothesis& hyp, const Matrix& V) {
    if (if_vector.size() != hyp.parameters()) throw DimensionError("influence vector does not match hypothesis");
    // ell_star evaluates (M'b - m)' [M'VM]^{-1} (M'b - m); with m = 0 it is the needed form.
    const LinearHypothesis centred(hyp.M(), Vector::Zero(hyp.rank()));
    return 2.0 * ell_star(if_vector, centred, V);
}

}  // namespace phireg

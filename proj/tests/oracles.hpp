#pragma once
// Reference computations written independently of the library, used as test oracles.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "phireg/divergence.hpp"
#include "phireg/survey_data.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Category probabilities with the last category as baseline; beta is d x (k+1).
inline VectorXd softmax_baseline(const MatrixXd& beta, const VectorXd& x) {
    const Eigen::Index d = beta.rows();
    VectorXd eta(d + 1);
    eta.head(d) = beta * x;
    eta(d) = 0.0;
    const double top = eta.maxCoeff();
    VectorXd e = (eta.array() - top).exp();
    return e / e.sum();
}

inline VectorXd flat(const MatrixXd& beta) {
    VectorXd v(beta.size());
    for (Eigen::Index r = 0; r < beta.rows(); ++r)
        for (Eigen::Index j = 0; j < beta.cols(); ++j) v(r * beta.cols() + j) = beta(r, j);
    return v;
}

inline MatrixXd unflat(const VectorXd& v, Eigen::Index d, Eigen::Index k1) {
    MatrixXd b(d, k1);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index j = 0; j < k1; ++j) b(r, j) = v(r * k1 + j);
    return b;
}

// Weighted pseudo-likelihood by iteratively reweighted least squares
// (Newton with the expected information), stopping on a 1e-13 step.
inline MatrixXd irls_pmle(const phireg::SurveyDataset& data, int max_iter = 500) {
    const Eigen::Index d = data.num_categories() - 1;
    const Eigen::Index k1 = data.num_covariates();
    const Eigen::Index p = d * k1;
    VectorXd b = VectorXd::Zero(p);
    for (int it = 0; it < max_iter; ++it) {
        VectorXd score = VectorXd::Zero(p);
        MatrixXd info = MatrixXd::Zero(p, p);
        const MatrixXd beta = unflat(b, d, k1);
        for (const auto& rec : data.records()) {
            const VectorXd pi = softmax_baseline(beta, rec.covariates);
            const double wm = rec.weight * rec.size;
            for (Eigen::Index r = 0; r < d; ++r) {
                const double resid = rec.weight * (rec.counts(r) - rec.size * pi(r));
                score.segment(r * k1, k1) += resid * rec.covariates;
                for (Eigen::Index s = 0; s < d; ++s) {
                    const double cov = (r == s ? pi(r) : 0.0) - pi(r) * pi(s);
                    info.block(r * k1, s * k1, k1, k1) += wm * cov * rec.covariates * rec.covariates.transpose();
                }
            }
        }
        const VectorXd step = info.ldlt().solve(score);
        b += step;
        if (step.lpNorm<Eigen::Infinity>() < 1e-13) break;
    }
    return unflat(b, d, k1);
}

// Kullback-Leibler member: (1/tau) sum w sum_s y log(y / (m pi)).
inline double kl_divergence(const phireg::SurveyDataset& data, const MatrixXd& beta) {
    double total = 0.0;
    for (const auto& rec : data.records()) {
        const VectorXd pi = softmax_baseline(beta, rec.covariates);
        for (Eigen::Index s = 0; s < pi.size(); ++s)
            if (rec.counts(s) > 0) total += rec.weight * rec.counts(s) * std::log(rec.counts(s) / (rec.size * pi(s)));
    }
    return total / data.tau();
}

// Pearson member (lambda = 1): (1/tau) sum w sum_s (y - m pi)^2 / (2 m pi).
inline double pearson_divergence(const phireg::SurveyDataset& data, const MatrixXd& beta) {
    double total = 0.0;
    for (const auto& rec : data.records()) {
        const VectorXd pi = softmax_baseline(beta, rec.covariates);
        for (Eigen::Index s = 0; s < pi.size(); ++s) {
            const double e = rec.size * pi(s);
            total += rec.weight * (rec.counts(s) - e) * (rec.counts(s) - e) / (2.0 * e);
        }
    }
    return total / data.tau();
}

// Random survey dataset with multinomial counts. Covariates ~ N(0,1),
// weights in [0.5, 2], sizes in [m_lo, m_hi], labels (h, i) starting at 1.
inline phireg::SurveyDataset random_dataset(std::mt19937_64& rng, Eigen::Index d, Eigen::Index k, int n,
                                            const MatrixXd& beta, int strata = 2, int m_lo = 5, int m_hi = 30) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> wdist(0.5, 2.0);
    std::uniform_int_distribution<int> mdist(m_lo, m_hi);
    std::vector<phireg::ClusterRecord> records;
    for (int c = 0; c < n; ++c) {
        phireg::ClusterRecord rec;
        rec.stratum = 1 + c % strata;
        rec.cluster = 1 + c / strata;
        rec.weight = wdist(rng);
        rec.size = mdist(rng);
        rec.covariates = VectorXd::Ones(k + 1);
        for (Eigen::Index j = 1; j <= k; ++j) rec.covariates(j) = z(rng);
        const VectorXd pi = softmax_baseline(beta, rec.covariates);
        rec.counts = VectorXd::Zero(d + 1);
        std::discrete_distribution<int> cat(pi.data(), pi.data() + pi.size());
        for (int u = 0; u < rec.size; ++u) rec.counts(cat(rng)) += 1.0;
        records.push_back(std::move(rec));
    }
    return phireg::SurveyDataset(std::move(records));
}

inline MatrixXd random_beta(std::mt19937_64& rng, Eigen::Index d, Eigen::Index k, double scale = 0.8) {
    std::uniform_real_distribution<double> u(-scale, scale);
    MatrixXd b(d, k + 1);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
    return b;
}

// Dataset whose counts equal their model expectation m pi(beta), so beta
// solves the estimating equations exactly for every lambda.
inline phireg::SurveyDataset at_expectation(const phireg::SurveyDataset& data, const MatrixXd& beta) {
    std::vector<phireg::ClusterRecord> recs = data.records();
    for (auto& r : recs) r.counts = r.size * softmax_baseline(beta, r.covariates);
    return phireg::SurveyDataset(std::move(recs));
}

// Root of the summed estimating function by Newton steps on a
// central-difference Jacobian, started at `start`.
inline VectorXd solve_estimating_equations(const phireg::SurveyDataset& data, double lambda, const VectorXd& start,
                                           Eigen::Index d, Eigen::Index k1) {
    const phireg::CressieReadLambda lam(lambda);
    auto u = [&](const VectorXd& b) {
        return phireg::estimating_function(lam, data, phireg::BetaMatrix::from_flat(b, d, k1));
    };
    VectorXd b = start;
    for (int it = 0; it < 50; ++it) {
        const VectorXd f = u(b);
        MatrixXd jac(b.size(), b.size());
        for (Eigen::Index q = 0; q < b.size(); ++q) {
            const double h = 1e-6 * std::max(1.0, std::abs(b(q)));
            VectorXd up = b, dn = b;
            up(q) += h;
            dn(q) -= h;
            jac.col(q) = (u(up) - u(dn)) / (2 * h);
        }
        const VectorXd step = jac.partialPivLu().solve(-f);
        b += step;
        if (step.lpNorm<Eigen::Infinity>() < 1e-15 * std::max(1.0, b.lpNorm<Eigen::Infinity>())) break;
    }
    return b;
}

// Derivative in eps of the estimator when cluster `index` has counts
// m ((1 - eps) pi + eps t) and all others sit at expectation; Richardson
// combination (10 D(1e-4) - D(1e-3)) / 9 of forward quotients.
inline VectorXd perturbation_influence(const phireg::SurveyDataset& data, const MatrixXd& beta0, double lambda,
                                       std::size_t index, Eigen::Index category) {
    const Eigen::Index d = beta0.rows(), k1 = beta0.cols();
    const phireg::SurveyDataset base = at_expectation(data, beta0);
    const VectorXd b0 = flat(beta0);
    auto quotient = [&](double eps) {
        std::vector<phireg::ClusterRecord> recs = base.records();
        auto& r = recs[index];
        VectorXd t = VectorXd::Zero(d + 1);
        t(category) = 1.0;
        r.counts = r.size * ((1.0 - eps) * softmax_baseline(beta0, r.covariates) + eps * t);
        const phireg::SurveyDataset perturbed(std::move(recs));
        return VectorXd((solve_estimating_equations(perturbed, lambda, b0, d, k1) - b0) / eps);
    };
    return (10.0 * quotient(1e-4) - quotient(1e-3)) / 9.0;
}

}  // namespace oracle

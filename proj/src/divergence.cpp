#include "phireg/divergence.hpp"

#include <cmath>

#include "phireg/detail/reduce.hpp"
#include "phireg/errors.hpp"

namespace phireg {

CressieReadLambda::CressieReadLambda(double lambda) : lambda_(lambda) {
    if (!std::isfinite(lambda) || !(lambda > -1.0))
        throw DomainError("Cressie-Read lambda must be finite and > -1");
}

double phi(CressieReadLambda lambda, double x) {
    if (!(x >= 0.0)) throw DomainError("phi is defined on [0, inf)");
    const double l = lambda.value();
    if (lambda.is_kl()) return x == 0.0 ? 1.0 : x * std::log(x) - x + 1.0;
    if (x == 0.0) return 1.0 / (1.0 + l);
    // x (x^l - 1) / l through expm1 stays accurate as l -> 0.
    return (x * std::expm1(l * std::log(x)) / l - (x - 1.0)) / (1.0 + l);
}

PhiGenerator cressie_read_generator(CressieReadLambda lambda) {
    PhiGenerator g;
    g.value = [lambda](double x) { return phi(lambda, x); };
    const double l = lambda.value();
    if (lambda.is_kl())
        g.derivative = [](double x) { return std::log(x); };
    else
        g.derivative = [l](double x) { return std::expm1(l * std::log(x)) / l; };
    g.second_derivative_at_one = 1.0;
    return g;
}

namespace {

// sum_s pi_s phi(p_s / pi_s) for one cluster, with p = y / m.
double cluster_divergence(CressieReadLambda lambda, const Vector& p, const Vector& pi) {
    const double l = lambda.value();
    double acc = 0.0;
    for (Index s = 0; s < p.size(); ++s) {
        const double ps = p(s);
        const double qs = pi(s);
        if (lambda.is_kl()) {
            acc += ps > 0.0 ? ps * std::log(ps / qs) - ps + qs : qs;
        } else {
            // pi phi(p/pi) = (p ((p/pi)^l - 1) / l - (p - pi)) / (1 + l); p = 0 gives pi/(1+l).
            const double lead = ps > 0.0 ? ps * std::expm1(l * std::log(ps / qs)) / l : 0.0;
            acc += (lead - (ps - qs)) / (1.0 + l);
        }
    }
    return acc;
}

Vector kron(const Vector& v, const Vector& x) {
    Vector out(v.size() * x.size());
    for (Index r = 0; r < v.size(); ++r) out.segment(r * x.size(), x.size()) = v(r) * x;
    return out;
}

}  // namespace

double divergence(CressieReadLambda lambda, const SurveyDataset& data, const BetaMatrix& beta) {
    const auto& recs = data.records();
    const double total = detail::pairwise_sum<double>(0, recs.size(), [&](std::size_t i) {
        const auto& r = recs[i];
        if (r.weight == 0.0) return 0.0;
        const CategoryProbs pi = link(beta, r.covariates);
        const Vector p = r.counts / static_cast<double>(r.size);
        return r.weight * r.size * cluster_divergence(lambda, p, pi.values());
    });
    return total / data.tau();
}

Vector estimating_function_cluster(CressieReadLambda lambda, const ClusterRecord& record,
                                   const BetaMatrix& beta) {
    const CategoryProbs probs = link(beta, record.covariates);
    const Vector& pi = probs.values();
    const Index d = pi.size() - 1;
    const double m = static_cast<double>(record.size);

    Vector v(d);
    if (lambda.is_kl()) {
        // Delta* diag^{-1}(pi) y = y* - m pi*: the pseudo-likelihood score, termwise.
        v = record.counts.head(d) - m * pi.head(d);
        return kron(record.weight * v, record.covariates);
    }

    const double l = lambda.value();
    Vector q(pi.size());
    for (Index s = 0; s < pi.size(); ++s) {
        const double ratio = record.counts(s) / (m * pi(s));
        q(s) = ratio > 0.0 ? std::pow(ratio, l + 1.0) : 0.0;
    }
    const double centre = pi.dot(q);
    for (Index r = 0; r < d; ++r) v(r) = pi(r) * (q(r) - centre);
    return kron(record.weight * m / (l + 1.0) * v, record.covariates);
}

Vector estimating_function(CressieReadLambda lambda, const SurveyDataset& data, const BetaMatrix& beta) {
    const auto& recs = data.records();
    return detail::pairwise_sum<Vector>(
        0, recs.size(), [&](std::size_t i) { return estimating_function_cluster(lambda, recs[i], beta); });
}

Vector estimating_function_cluster_generic(const PhiGenerator& phi_gen, const ClusterRecord& record,
                                           const BetaMatrix& beta) {
    const CategoryProbs pi = link(beta, record.covariates);
    const double m = static_cast<double>(record.size);
    Vector f(pi.size());
    for (Index s = 0; s < pi.size(); ++s) {
        const double u = record.counts(s) / (m * pi[s]);
        // u phi'(u) -> 0 as u -> 0 for the generators shipped here.
        f(s) = (u > 0.0 ? u * phi_gen.derivative(u) : 0.0) - phi_gen.value(u);
    }
    return record.weight * m / phi_gen.second_derivative_at_one * (dpi_dbeta(pi, record.covariates) * f);
}

}  // namespace phireg

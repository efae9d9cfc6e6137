#pragma once

#include <functional>

#include "phireg/model.hpp"
#include "phireg/survey_data.hpp"

namespace phireg {

/// Cressie-Read tuning parameter, lambda > -1.
class CressieReadLambda {
public:
    explicit CressieReadLambda(double lambda);

    double value() const noexcept { return lambda_; }
    /// lambda == 0, the Kullback-Leibler member.
    bool is_kl() const noexcept { return lambda_ == 0.0; }

private:
    double lambda_;
};

/// phi_lambda(x) = (x^{lambda+1} - x - lambda (x - 1)) / (lambda (1 + lambda)),
/// and x log x - x + 1 at lambda = 0.
double phi(CressieReadLambda lambda, double x);

/// Convex generator of a phi-divergence. Only the Cressie-Read family ships,
/// but the general estimating equations are written against this interface.
struct PhiGenerator {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    double second_derivative_at_one = 1.0;
};

PhiGenerator cressie_read_generator(CressieReadLambda lambda);

/// d_phi(p_hat, pi(beta)) = (1/tau) sum w m sum_s pi_s phi(y_s / (m pi_s)).
double divergence(CressieReadLambda lambda, const SurveyDataset& data, const BetaMatrix& beta);

/// Per-cluster estimating function
///   w / ((lambda+1) m^lambda) Delta*(pi) diag^{-(lambda+1)}(pi) y^{lambda+1} (x) x.
/// At lambda = 0 this is the pseudo-likelihood score w (y* - m pi*) (x) x.
///
/// Scale: the sum over clusters equals -tau times the gradient of
/// `divergence` (phi''(1) = 1 for every Cressie-Read member).
Vector estimating_function_cluster(CressieReadLambda lambda, const ClusterRecord& record,
                                   const BetaMatrix& beta);

/// Sum of the per-cluster estimating functions (pairwise, dataset order).
Vector estimating_function(CressieReadLambda lambda, const SurveyDataset& data, const BetaMatrix& beta);

/// Same estimating function through the general form
///   (w m / phi''(1)) dpi'/dbeta f_phi(y/m, beta),
///   f_s(x) = (x/pi_s) phi'(x/pi_s) - phi(x/pi_s).
Vector estimating_function_cluster_generic(const PhiGenerator& phi, const ClusterRecord& record,
                                           const BetaMatrix& beta);

}  // namespace phireg

#include "phireg/distributions.hpp"

#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "phireg/errors.hpp"

namespace phireg::dist {

namespace bm = boost::math;

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs 0 < p < 1");
    return bm::quantile(bm::normal_distribution<double>(), p);
}

double chi2_cdf(double x, double df) {
    if (!(df > 0.0)) throw DomainError("chi-square degrees of freedom must be positive");
    if (x <= 0.0) return 0.0;
    return bm::cdf(bm::chi_squared_distribution<double>(df), x);
}

double chi2_sf(double x, double df) {
    if (!(df > 0.0)) throw DomainError("chi-square degrees of freedom must be positive");
    if (x <= 0.0) return 1.0;
    return bm::cdf(bm::complement(bm::chi_squared_distribution<double>(df), x));
}

double chi2_upper_quantile(double df, double alpha) {
    if (!(df > 0.0)) throw DomainError("chi-square degrees of freedom must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("significance level must lie in (0, 1)");
    return bm::quantile(bm::complement(bm::chi_squared_distribution<double>(df), alpha));
}

}  // namespace phireg::dist

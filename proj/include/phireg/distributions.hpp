#pragma once

namespace phireg::dist {

double normal_cdf(double x);
/// Phi^{-1}(p), 0 < p < 1.
double normal_quantile(double p);

/// P(X <= x) for X ~ chi^2_df.
double chi2_cdf(double x, double df);
/// P(X > x), evaluated directly (no 1 - cdf cancellation).
double chi2_sf(double x, double df);
/// Upper alpha quantile chi^2_{df, alpha}: P(X > q) = alpha.
double chi2_upper_quantile(double df, double alpha);

}  // namespace phireg::dist

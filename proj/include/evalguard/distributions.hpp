#pragma once

// Normal and one-degree-of-freedom chi-square distribution functions.

namespace evalguard {

double normal_cdf(double x);
double normal_sf(double x);
// Inverse of normal_cdf on (0, 1); accurate in both tails.
double normal_quantile(double p);

double chisq1_cdf(double x);
double chisq1_sf(double x);
// x with P(chi2_1 <= x) = p, p in (0, 1). Relative accuracy ~1e-15 near 0.
double chisq1_quantile(double p);
// x with P(chi2_1 > x) = q, q in (0, 1). Use this for small upper tails;
// chisq1_quantile(1 - q) loses the low-order digits of q.
double chisq1_upper_quantile(double q);

// Noncentral chi-square, one degree of freedom, noncentrality lambda.
// Poisson mixture of central chi-square(1 + 2k) distribution functions,
// truncated once k >= lambda / 2 and the remaining Poisson mass is < 1e-12.
double noncentral_chisq1_cdf(double x, double lambda);
// Closed form Phi(sqrt(x) - sqrt(lambda)) - Phi(-sqrt(x) - sqrt(lambda)).
double noncentral_chisq1_cdf_normal(double x, double lambda);
// Upper tail 1 - F, evaluated directly from the normal form (no cancellation).
double noncentral_chisq1_sf(double x, double lambda);

} // namespace evalguard

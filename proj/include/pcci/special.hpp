#pragma once

#include <cstddef>
#include <vector>

namespace pcci {

// Standard normal CDF and quantile function.
double normal_cdf(double x);
double normal_quantile(double p);

// Regularized incomplete gamma functions P(a, x) (lower) and Q(a, x) (upper),
// absolute error below 1e-12 for the argument ranges used here.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Chi-squared distribution with k degrees of freedom.
double chi2_cdf(double x, double k);
double chi2_sf(double x, double k);        // survival function 1 - CDF
double chi2_quantile(double p, double k);  // inverse CDF

// Kolmogorov-Smirnov sup-distance between the empirical CDF of `sample`
// and the uniform distribution on [0, 1]. `sample` need not be sorted.
double ks_uniform(const std::vector<double>& sample);

// Same statistic against an arbitrary continuous reference CDF applied to
// each sample point: pass the reference-CDF values F(x_i).
double ks_from_cdf_values(std::vector<double> cdf_values);

}  // namespace pcci

#pragma once

#include <cstdint>

namespace hidim {

// Upper-tail probabilities, clamped to [0, 1].
double normal_sf(double x);
double chi2_sf(double x, double df);
double scaled_chi2_sf(double x, double scale, double df);
double f_sf(double x, double d1, double d2);

double f_upper_quantile(double alpha, double d1, double d2);
double normal_upper_quantile(double alpha);

double poisson_cdf(std::int64_t k, double mean);
// Smallest k with P(Y <= k) >= u.
std::int64_t poisson_quantile(double u, double mean);

}  // namespace hidim

#pragma once

namespace hidim {

double log_gamma(double x);

// Both use upward recurrence until the argument reaches 10, then the asymptotic series.
double digamma(double x);
double trigamma(double x);

}  // namespace hidim

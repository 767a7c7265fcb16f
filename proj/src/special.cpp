#include "hidim/special.hpp"

#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>

#include "hidim/error.hpp"

namespace hidim {

double log_gamma(double x) {
    require(x > 0, "log_gamma: argument must be positive");
    return boost::math::lgamma(x);
}

double digamma(double x) {
    require(x > 0 && std::isfinite(x), "digamma: argument must be positive and finite");
    double shift = 0.0;
    while (x < 10.0) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli-number series in 1/x^2.
    const double series =
        inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132)))));
    return shift + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
    require(x > 0 && std::isfinite(x), "trigamma: argument must be positive and finite");
    double shift = 0.0;
    while (x < 10.0) {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv + 0.5 * inv2 +
        inv * inv2 * (1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (1.0 / 42 - inv2 * (1.0 / 30 - inv2 * (5.0 / 66)))));
    return shift + series;
}

}  // namespace hidim

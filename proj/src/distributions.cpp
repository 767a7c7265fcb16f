#include "hidim/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "hidim/error.hpp"

namespace hidim {

namespace bm = boost::math;

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

double normal_sf(double x) {
    if (std::isnan(x)) throw NumericalError("normal_sf: NaN statistic");
    if (x == std::numeric_limits<double>::infinity()) return 0.0;
    if (x == -std::numeric_limits<double>::infinity()) return 1.0;
    return clamp01(bm::cdf(bm::complement(bm::normal_distribution<>(0.0, 1.0), x)));
}

double chi2_sf(double x, double df) {
    require(df > 0, "chi-square degrees of freedom must be positive");
    if (std::isnan(x)) throw NumericalError("chi2_sf: NaN statistic");
    if (x <= 0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return clamp01(bm::cdf(bm::complement(bm::chi_squared_distribution<>(df), x)));
}

double scaled_chi2_sf(double x, double scale, double df) {
    require(scale > 0, "scaled chi-square scale must be positive");
    return chi2_sf(x / scale, df);
}

double f_sf(double x, double d1, double d2) {
    require(d1 > 0 && d2 > 0, "F degrees of freedom must be positive");
    if (std::isnan(x)) throw NumericalError("f_sf: NaN statistic");
    if (x <= 0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return clamp01(bm::cdf(bm::complement(bm::fisher_f_distribution<>(d1, d2), x)));
}

double f_upper_quantile(double alpha, double d1, double d2) {
    require(alpha > 0 && alpha < 1, "alpha must lie in (0, 1)");
    return bm::quantile(bm::complement(bm::fisher_f_distribution<>(d1, d2), alpha));
}

double normal_upper_quantile(double alpha) {
    require(alpha > 0 && alpha < 1, "alpha must lie in (0, 1)");
    return bm::quantile(bm::complement(bm::normal_distribution<>(0.0, 1.0), alpha));
}

double poisson_cdf(std::int64_t k, double mean) {
    if (k < 0) return 0.0;
    if (mean <= 0.0) return 1.0;
    return clamp01(bm::cdf(bm::poisson_distribution<>(mean), static_cast<double>(k)));
}

std::int64_t poisson_quantile(double u, double mean) {
    require(u >= 0 && u <= 1, "poisson_quantile: probability outside [0, 1]");
    if (mean <= 0.0 || u == 0.0) return 0;
    using Policy = bm::policies::policy<bm::policies::discrete_quantile<bm::policies::integer_round_up>>;
    bm::poisson_distribution<double, Policy> dist(mean);
    if (u >= 1.0) throw NumericalError("poisson_quantile: probability 1 has no finite quantile");
    auto k = static_cast<std::int64_t>(bm::quantile(dist, u));
    // Guard against rounding at the boundary so the result is the exact generalized inverse.
    while (k > 0 && poisson_cdf(k - 1, mean) >= u) --k;
    while (poisson_cdf(k, mean) < u) ++k;
    return k;
}

}  // namespace hidim

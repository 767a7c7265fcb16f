#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hidim/data.hpp"
#include "hidim/rng.hpp"
#include "hidim/test_result.hpp"

namespace hidim {

using Diagnostics = std::vector<std::pair<std::string, double>>;
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

constexpr int kDefaultPermutations = 999;

TestResult hotelling_t2(const TwoSample& s);

// Sum over coordinates of |mean difference| / pooled variance, calibrated by label permutation.
double chung_fraser_statistic(const TwoSample& s);
TestResult chung_fraser(const TwoSample& s, RngStream& rng, int permutations = kDefaultPermutations);

TestResult dempster(const TwoSample& s);
TestResult bai_saranadasa(const TwoSample& s);

// Leave-out U-statistic estimates of tr(S1^2), tr(S2^2) and tr(S1 S2).
struct TraceEstimates {
    double tr_s1_sq = 0.0;
    double tr_s2_sq = 0.0;
    double tr_s1_s2 = 0.0;
};
TraceEstimates cq_trace_estimates(const TwoSample& s);
// Same estimates from the Gram matrix of the stacked rows [X; Y], with X in the first n rows.
TraceEstimates cq_trace_estimates_from_gram(const Matrix& gram, Index n);

// Unbiased estimate of ||mu1 - mu2||^2 built from off-diagonal inner products.
double chen_qin_functional(const TwoSample& s);
TestResult chen_qin(const TwoSample& s);

TestResult srivastava_du(const TwoSample& s, bool drop_correction = false);

struct ParkAyyalaParts {
    double u_n = 0.0;
    double tr_r1_sq = 0.0;
    double tr_r2_sq = 0.0;
    double tr_r1_r2 = 0.0;
};
// Evaluates the leave-out functional and the three correlation-trace estimators on the
// data exactly as given.
ParkAyyalaParts park_ayyala_parts(const TwoSample& s);
TestResult park_ayyala(const TwoSample& s);

// Observation masks: true where the entry was observed. Values at unobserved
// positions are ignored.
struct MissingMask {
    BoolArray x_observed;
    BoolArray y_observed;
};
TestResult pct(const TwoSample& s, const std::optional<MissingMask>& mask = std::nullopt);

double gct_aggregate(const TwoSample& s);

struct ClxPrecision {
    enum class Kind { identity, diagonal_inverse, user };
    Kind kind = Kind::diagonal_inverse;
    Matrix user;  // used when kind == user
};
// Gumbel-scale critical value 2 log p - log log p - log pi - 2 log log(1/(1-alpha)).
double clx_threshold(Index p, double alpha);
TestResult clx_max_test(const TwoSample& s, const ClxPrecision& omega = {}, double alpha = 0.05);

// Bayes factor as a function of the F-scaled Hotelling statistic.
double zoh_bayes_factor_value(double t2, Index n, Index m, Index p, double tau0);
TestResult zoh_bayes_factor(const TwoSample& s, double tau0, double alpha = 0.05);

// Descriptive ratios for the covariance conditions of the asymptotic tests.
Diagnostics assumption_diagnostics(const TwoSample& s);
// The same ratios for a given covariance matrix (its correlation matrix supplies the R ratios).
Diagnostics structure_ratios(const Matrix& sigma);

}  // namespace hidim

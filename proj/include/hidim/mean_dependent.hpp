#pragma once

#include <optional>
#include <vector>

#include "hidim/data.hpp"
#include "hidim/rng.hpp"
#include "hidim/test_result.hpp"

namespace hidim {

// Lags here are 0-based: lag a pairs row i with row i + a. Written in 1-based labels the
// same coefficient is theta_coefficient_one_based(n, a + 1, b + 1).

// (1/n) sum_{i < n - a} (X_i - Xbar)(X_{i+a} - Xbar)^T.
Matrix autocov_biased(const DataMatrix& m, Index lag);

// Coefficient of tr Sigma(b) in E[tr autocov_biased(., a)] for a stationary sequence of
// length n, where lag b counts both Sigma(b) and Sigma(-b) (they have equal traces).
double theta_coefficient(Index n, Index a, Index b);
double theta_coefficient_one_based(Index n, Index a, Index b);

// Leading (L+1) x (L+1) block of the coefficient matrix.
Matrix theta_matrix(Index n, Index lag_cap);

struct AutocovTraceSet {
    Vector raw;       // tr autocov_biased(a), a = 0..lag_cap
    Vector debiased;  // solution of theta_matrix * debiased = raw
    Index lag_cap = 0;
};

// Throws NumericalError if the truncated coefficient matrix has condition number above 1e8.
AutocovTraceSet debiased_traces(const DataMatrix& m, Index lag_cap);

// ||Xbar - Ybar||^2 minus the weighted debiased trace corrections over lags |a| <= order.
// The trace system of each group is truncated at lag_cap, which defaults to order + 2.
double m_n_functional(const TwoSample& s, Index order, std::optional<Index> lag_cap = std::nullopt);

// Standardized functional for M-dependent sequences, referred to N(0, 1).
TestResult apr_test(const TwoSample& s, Index order);

// Estimate of tr(Omega_x^2), with Omega_x = sum_{|a| <= order} (1 - |a|/n) Sigma(a),
// from products of centered rows in blocks that are more than `order` apart.
double apr_omega_trace_sq(const DataMatrix& m, Index order);
// Estimate of tr(Omega_x Omega_y) for independent groups.
double apr_omega_cross_trace(const DataMatrix& x, const DataMatrix& y, Index order);

struct StationaryProcessSpec {
    Vector mu;
    std::vector<Matrix> ma_coefficients;  // A_0, ..., A_M, each p x p

    Index order() const { return static_cast<Index>(ma_coefficients.size()) - 1; }
    // E[(X_i - mu)(X_{i+a} - mu)^T] = sum_j A_j A_{j+a}^T, zero beyond the order.
    Matrix autocovariance(Index lag) const;
};

// X_i = mu + sum_j A_j e_{i-j} with e i.i.d. N(0, I_p).
DataMatrix generate_ma_process(const StationaryProcessSpec& spec, Index n, RngStream& rng);

}  // namespace hidim

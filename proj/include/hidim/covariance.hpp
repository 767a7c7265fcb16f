#pragma once

#include <utility>
#include <vector>

#include "hidim/data.hpp"
#include "hidim/rng.hpp"
#include "hidim/test_result.hpp"

namespace hidim {

// ---------------------------------------------------------------------------
// Estimation

struct BandedEstimate {
    Matrix matrix;
    Index band_width = 0;  // entries with |i - j| >= band_width are zero
    std::vector<std::pair<Index, double>> cv_risk_curve;
};

// Keeps entries with |i - j| < k.
Matrix band_matrix(const Matrix& a, Index k);

// Picks k by folds-fold cross validation of the Frobenius distance between the banded
// training covariance and the held-out covariance (both with divisor equal to their row
// count). Ties go to the smallest k. The returned matrix bands the full-data covariance.
BandedEstimate banded_covariance(const DataMatrix& m, const std::vector<Index>& k_candidates, int folds,
                                 RngStream& rng);

// -(n/2)[log det Sigma + tr(S Sigma^{-1})] with S the divisor-n sample covariance.
double gaussian_loglik_cov(const Matrix& sigma, const DataMatrix& m);
// (n/2)[log det Omega - tr(S Omega)].
double gaussian_loglik_prec(const Matrix& omega, const DataMatrix& m);

enum class PenaltyKind { lasso, fused, group, guo };
enum class PenaltyTarget { covariance, precision };

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::lasso;
    double lambda = 0.0;   // lasso
    Matrix weights;        // lasso on a covariance; empty means all ones
    double lambda1 = 0.0;  // joint penalties
    double lambda2 = 0.0;
};

// Likelihood minus lambda * sum_ij w_ij |a_ij| (covariance target) or lambda * ||Omega||_1
// (precision target). Only the lasso kind applies to a single matrix.
double penalized_objective(const Matrix& param, const DataMatrix& m, const PenaltySpec& spec, PenaltyTarget target);

// Fused or group penalty of K >= 2 precision matrices (off-diagonal entries only).
double joint_penalty(const std::vector<Matrix>& precisions, const PenaltySpec& spec);
// lambda1 * sum_{i != j} |theta_ij| + lambda2 * sum_{i != j} sum_k |gamma^(k)_ij|.
double guo_penalty(const Matrix& shared, const std::vector<Matrix>& group_factors, const PenaltySpec& spec);

// Sum of per-group precision log-likelihoods minus the joint penalty.
double joint_penalized_objective(const std::vector<Matrix>& precisions, const std::vector<DataMatrix>& groups,
                                 const PenaltySpec& spec);
// Same with Omega^(k) = shared o group_factors[k] (elementwise).
double guo_penalized_objective(const Matrix& shared, const std::vector<Matrix>& group_factors,
                               const std::vector<DataMatrix>& groups, const PenaltySpec& spec);

// ---------------------------------------------------------------------------
// One-sample structure tests. S is the divisor-n sample covariance throughout.

double u_functional(const Matrix& s);
double v_functional(const Matrix& s);
double w_functional(const Matrix& s, Index n);

// n p U / 2 against chi-square with p(p+1)/2 - 1 degrees of freedom.
TestResult sphericity_test_un(const DataMatrix& m);
// n p V / 2 and n p W / 2 against chi-square with p(p+1)/2 degrees of freedom.
TestResult identity_test_vn(const DataMatrix& m);
TestResult identity_test_wn(const DataMatrix& m);

// ---------------------------------------------------------------------------
// Equality of covariance matrices

// sum_g n_g (log|S_pl| - log|S_g|) >= 0 against chi-square with (K-1)p(p+1)/2 df.
TestResult equality_lrt(const std::vector<DataMatrix>& groups);

// Large-dimension correction of the two-sample statistic; requires n == m and p < n.
TestResult equality_lrt_corrected(const TwoSample& s);

// One-sample identity LRT tr S - log|S| - p with the same correction, n taken as rows - 1
// and S unbiased.
TestResult identity_lrt_corrected(const DataMatrix& m);

// Frobenius-distance functional with its bias correction. Uses unbiased S_g and
// n_g = rows - 1 so the functional is unbiased for sum_{g<h} tr(Sigma_g - Sigma_h)^2.
double schott_fn(const std::vector<DataMatrix>& groups);
TestResult schott_test(const std::vector<DataMatrix>& groups, int permutations, RngStream& rng,
                       unsigned threads = 1);

// A1 + A2 - 2 A12 from the leave-out trace estimators, on the data as given.
double li_chen_functional(const TwoSample& s);
// Permutation test on within-group centered rows.
TestResult li_chen_test(const TwoSample& s, int permutations, RngStream& rng, unsigned threads = 1);

enum class StructureHypothesis { sphericity, identity };

// Projects rows with a Haar k x p matrix and runs the U (sphericity) or W (identity) test.
// Experimental.
TestResult projected_structure_test(const DataMatrix& m, Index k, StructureHypothesis which, RngStream& rng);

}  // namespace hidim

#pragma once

#include <cstdint>
#include <vector>

#include "hidim/data.hpp"
#include "hidim/rng.hpp"
#include "hidim/test_result.hpp"

namespace hidim {

using Counts = std::vector<std::int64_t>;

std::int64_t count_total(const Counts& x);

// ---------------------------------------------------------------------------
// Multinomial

// log P(X = x) for X ~ Mult(sum x, pi); -inf when x_k > 0 for some pi_k = 0.
double multinomial_logpmf(const Counts& x, const Vector& pi);

// Maximum likelihood estimate counts / total.
Vector multinomial_mle(const Counts& x);

// P(X_1 <= a_1, ..., X_p <= a_p) for X ~ Mult(total, pi) through the Poisson
// representation with rate scale s (s <= 0 selects s = total).
double levin_log_cdf(const Counts& bounds, std::int64_t total, const Vector& pi, double s = 0.0);
double levin_cdf(const Counts& bounds, std::int64_t total, const Vector& pi, double s = 0.0);

Counts sample_multinomial(std::int64_t total, const Vector& pi, RngStream& rng);

enum class MultinomialMethod { pearson, lrt, chan1, chan2, pp };

struct MultinomialTestOptions {
    int permutations = 999;  // chan1 / chan2
    // Chi-square degrees of freedom for pearson / lrt; negative means (retained categories - 1).
    double df = -1.0;
    unsigned threads = 1;
};

// Categories empty in both samples are dropped for pearson, lrt and chan1.
TestResult multinomial_two_sample(const Counts& x, const Counts& y, MultinomialMethod method, RngStream& rng,
                                  const MultinomialTestOptions& options = {});

// ---------------------------------------------------------------------------
// Dirichlet-multinomial

double dirmult_logpmf(const Counts& x, const Vector& theta);

struct DirMultMoments {
    Vector mean;
    Matrix covariance;          // p x p, singular because the total is fixed
    Matrix reduced_covariance;  // covariance of the first p - 1 counts
    Matrix precision;           // inverse of reduced_covariance in closed form
};
DirMultMoments dirmult_moments(const Vector& theta, std::int64_t total);

// Dirichlet draw followed by a multinomial draw.
Counts sample_dirmult(std::int64_t total, const Vector& theta, RngStream& rng);

// Log-likelihood of the sample (rows are count vectors), its gradient in theta and the
// Hessian written as diag(q) + c 11^T.
double dirmult_loglik(const std::vector<Counts>& sample, const Vector& theta);
Vector dirmult_gradient(const std::vector<Counts>& sample, const Vector& theta);
struct RankOneHessian {
    Vector diagonal;  // q
    double shift = 0.0;  // c
    Matrix dense() const;
};
RankOneHessian dirmult_hessian(const std::vector<Counts>& sample, const Vector& theta);
// H^{-1} v by the Sherman-Morrison identity, O(p).
Vector rank_one_solve(const RankOneHessian& h, const Vector& v);

enum class DirMultInit { ronning, mom, user };

struct DirMultFitOptions {
    DirMultInit init = DirMultInit::ronning;
    Vector user_theta;  // used with DirMultInit::user
    double tol = 1e-8;  // on the max-norm of the gradient
    int max_iter = 500;
};

struct DirMultFit {
    Vector theta;
    double loglik = 0.0;
    int iterations = 0;
    double grad_norm = 0.0;
    std::vector<double> loglik_path;  // one entry per accepted iterate, starting point first
};

// Starting values, exposed for testing.
Vector dirmult_initial_theta(const std::vector<Counts>& sample, DirMultInit init);

// Newton-Raphson with step halving. Throws NumericalError when max_iter is reached.
DirMultFit dirmult_fit(const std::vector<Counts>& sample, const DirMultFitOptions& options = {});

// ---------------------------------------------------------------------------
// Multivariate Bernoulli, full 2^p table. Configuration x has index sum_k x_k 2^k.

struct MvBernoulliParams {
    std::vector<double> table;
    int p = 0;

    static MvBernoulliParams from_table(std::vector<double> table);
    static MvBernoulliParams independent(const Vector& probs);
};

double mvbernoulli_logpmf(const std::vector<int>& x, const MvBernoulliParams& params);
double mvbernoulli_marginal(const MvBernoulliParams& params, int k);

// ---------------------------------------------------------------------------
// Multivariate Poisson

double bivpois_logpmf(std::int64_t x1, std::int64_t x2, double lambda1, double lambda2, double lambda3);

// Rows of X_k = Z_kk + sum_{j != k} Z_jk with Z_jk = Z_kj ~ Pois(rates(j, k)) independent.
DataMatrix mvpois_sample_latent(const Matrix& rates, Index n, RngStream& rng);

enum class CorrelationSign { positive, negative };

// Inverse-CDF construction sharing a uniform between the columns (1 - U for a
// negative correlation). Columns are swapped internally so the smaller rate comes first.
DataMatrix bivpois_sample_norta(double lambda1, double lambda2, CorrelationSign sign, double lambda_star, Index n,
                                RngStream& rng);

// log rates ~ N(log_mu, log_sigma), then independent Poisson counts. log_sigma may be
// positive semidefinite.
DataMatrix mvpois_sample_compound(const Vector& log_mu, const Matrix& log_sigma, Index n, RngStream& rng);

}  // namespace hidim

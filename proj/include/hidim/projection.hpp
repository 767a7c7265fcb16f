#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hidim/data.hpp"
#include "hidim/rng.hpp"
#include "hidim/test_result.hpp"

namespace hidim {

enum class ProjectionKind { gaussian, uniform_sqrt3, sign, sparse, haar, block_weighted };

struct ProjectionSpec {
    ProjectionKind kind = ProjectionKind::gaussian;
    Index k = 1;
    double theta = 3.0;  // sparsity parameter of the sparse kind, >= 1
};

struct ProjectionMatrix {
    Matrix values;  // k x p
    ProjectionSpec spec;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
};

ProjectionMatrix generate_projection(const ProjectionSpec& spec, Index p, RngStream& rng);

// Hotelling statistic on the scores of the top-k eigenvectors of the pooled covariance.
TestResult projected_hotelling(const TwoSample& s, Index k);

// p-values of projected_hotelling for k = k_min..k_max from one eigendecomposition.
// k_max = 0 means "every admissible k". Eigenvalues below 1e-10 times the largest are
// treated as zero, and at most n+m-2 components are used.
std::vector<std::pair<Index, double>> scan_k(const TwoSample& s, Index k_min = 1, Index k_max = 0);

TestResult t2_random_projection(const TwoSample& s, const Matrix& r);

struct RapttOptions {
    Index n_projections = 50;
    ProjectionSpec spec{ProjectionKind::gaussian, 0, 3.0};  // k = 0 selects floor((n+m)/2)
    double alpha = 0.05;
    Index null_reps = 200;
};

// Average projection p-values of null_reps data sets drawn with mu = 0, Sigma = I, sorted ascending.
std::vector<double> raptt_null_averages(Index n, Index m, Index p, const RapttOptions& options, RngStream& rng);

// The ceil(M*level)-th smallest of the sorted null averages.
double raptt_order_statistic(const std::vector<double>& sorted_null, double level);

// Rejects when the data's average p-value falls below the alpha-quantile of the null
// averages. Reports both that cutoff and the (1-alpha) order statistic.
TestResult raptt(const TwoSample& s, const RapttOptions& options, RngStream& rng);
TestResult raptt_with_null(const TwoSample& s, const RapttOptions& options, const std::vector<double>& sorted_null,
                           RngStream& rng);

}  // namespace hidim

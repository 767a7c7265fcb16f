#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cli/config.hpp"
#include "hidim/discrete.hpp"
#include "hidim/factor_model.hpp"
#include "hidim/projection.hpp"
#include "hidim/rng.hpp"
#include "hidim/test_result.hpp"

namespace hidim::cli {

// "normal", "laplace" or "gamma(shape)".
struct InnovationChoice {
    InnovationLaw law = InnovationLaw::normal;
    double shape = 1.0;
};
InnovationChoice parse_innovation(const std::string& text);

// "identity", "scaled_identity(c)", "diag_uniform(a,b)", "ar1(rho)" or "compound(rho)".
// diag_uniform draws its diagonal from rng.
Matrix covariance_from_spec(const std::string& text, Index p, RngStream& rng);

// Rows mu + Gamma z with Gamma a square root of sigma (the diagonal case skips the product).
class GaussianDesign {
public:
    GaussianDesign(Vector mu, const Matrix& sigma, InnovationChoice innovation = {});
    DataMatrix draw(Index n, RngStream& rng) const;

private:
    Vector mu_;
    Vector scale_;   // used when sigma is diagonal
    Matrix factor_;  // lower Cholesky factor otherwise
    bool diagonal_;
    InnovationChoice innovation_;
};

// Probability vector from "uniform" or "zipf(s)".
Vector probabilities_from_spec(const std::string& text, Index p);

struct MethodOptions {
    double alpha = 0.05;
    int permutations = 199;
    Index projections = 50;
    Index null_reps = 200;
    Index k = 0;
    Index order = 1;
    double tau0 = 1.0;
    double df = -1.0;
    std::string projection = "gaussian";
    unsigned threads = 1;
    // Precomputed sorted null averages for raptt; drawn on the fly when null.
    const std::vector<double>* raptt_null = nullptr;
};

enum class MethodFamily { mean, covariance, multinomial };
bool is_known_method(MethodFamily family, const std::string& method);
ProjectionKind parse_projection_kind(const std::string& name);

// Method names accepted by each family; unknown names throw InputError.
TestResult run_mean_method(const std::string& method, const TwoSample& s, const MethodOptions& options, RngStream& rng);
// Two-sample methods use both groups, one-sample methods only the first. `extra_groups`
// feed the K-group likelihood ratio test.
TestResult run_covariance_method(const std::string& method, const TwoSample& s,
                                 const std::vector<DataMatrix>& extra_groups, const MethodOptions& options,
                                 RngStream& rng);
TestResult run_multinomial_method(const std::string& method, const Counts& x, const Counts& y,
                                  const MethodOptions& options, RngStream& rng);

struct ResultRecord {
    std::string method;
    Index replicate = 0;
    double statistic = 0.0;
    double p_value = 1.0;
    bool reject = false;
    bool ok = true;
};

struct SimulationOutput {
    std::vector<ResultRecord> records;  // replicate-major, methods in config order
    nlohmann::ordered_json summary;
};

SimulationOutput run_simulation(const SimConfig& config, unsigned threads);
std::string records_csv(const std::vector<ResultRecord>& records);

// Figure-ready p-value curves over k.
struct ScanCurves {
    std::vector<std::string> labels;
    std::vector<std::vector<std::pair<Index, double>>> curves;
};
std::string scan_curves_csv(const ScanCurves& curves);

// One curve per delta with second mean delta * 1. The noise draws are shared across
// deltas, so the columns differ only through the shift.
ScanCurves delta_grid_curves(std::uint64_t seed, Index n, Index m, Index p, const std::string& sigma,
                             const std::vector<double>& deltas, Index k_min = 1, Index k_max = 0);
// n = m = 100, p = 50, diagonal variances ~ Unif(2, 3).
ScanCurves figure1_curves(std::uint64_t seed, const std::vector<double>& deltas = {0.0, 0.2, 0.4, 1.0},
                          Index k_min = 1, Index k_max = 0);
// p = 500, n in {10, 100, 200}, m = 2n, second mean 1, diagonal variances ~ Unif(2, 3).
ScanCurves figure2_curves(std::uint64_t seed, const std::vector<Index>& sizes = {10, 100, 200}, Index k_min = 1,
                          Index k_max = 0);

}  // namespace hidim::cli

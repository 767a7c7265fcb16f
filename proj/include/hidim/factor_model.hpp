#pragma once

#include "hidim/data.hpp"
#include "hidim/rng.hpp"

namespace hidim {

enum class InnovationLaw { normal, laplace, centered_gamma };

// Rows are mu + Gamma z with z having i.i.d. standardized innovations.
struct FactorModelSpec {
    Vector mu;
    Matrix gamma;  // p x q
    InnovationLaw law = InnovationLaw::normal;
    double gamma_shape = 1.0;  // only used by centered_gamma

    // Fourth moment of the innovation minus 3.
    double excess_kurtosis() const;
    Matrix covariance() const { return gamma * gamma.transpose(); }
};

double draw_innovation(InnovationLaw law, double gamma_shape, RngStream& rng);

DataMatrix generate_factor_sample(const FactorModelSpec& spec, Index n, RngStream& rng);

// Convenience: n rows of N(mu, diag(variances)).
DataMatrix generate_diagonal_normal(const Vector& mu, const Vector& variances, Index n, RngStream& rng);

}  // namespace hidim

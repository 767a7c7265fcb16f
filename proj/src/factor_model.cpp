#include "hidim/factor_model.hpp"

#include <cmath>

#include "hidim/error.hpp"

namespace hidim {

double FactorModelSpec::excess_kurtosis() const {
    switch (law) {
        case InnovationLaw::normal: return 0.0;
        case InnovationLaw::laplace: return 3.0;
        case InnovationLaw::centered_gamma: return 6.0 / gamma_shape;
    }
    return 0.0;
}

double draw_innovation(InnovationLaw law, double gamma_shape, RngStream& rng) {
    switch (law) {
        case InnovationLaw::normal: return rng.normal();
        case InnovationLaw::laplace: {
            // Scale 1/sqrt(2) gives unit variance.
            const double u = rng.uniform_open() - 0.5;
            const double magnitude = -std::log1p(-2.0 * std::abs(u)) / std::sqrt(2.0);
            return u < 0 ? -magnitude : magnitude;
        }
        case InnovationLaw::centered_gamma:
            return (rng.gamma(gamma_shape) - gamma_shape) / std::sqrt(gamma_shape);
    }
    return 0.0;
}

DataMatrix generate_factor_sample(const FactorModelSpec& spec, Index n, RngStream& rng) {
    require(n >= 1, "generate_factor_sample: n must be positive");
    require(spec.gamma.rows() == spec.mu.size(), "generate_factor_sample: gamma rows must match mu length");
    require(spec.law != InnovationLaw::centered_gamma || spec.gamma_shape > 0.0,
            "generate_factor_sample: gamma shape must be positive");
    const Index q = spec.gamma.cols();
    Matrix z(n, q);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < q; ++j) z(i, j) = draw_innovation(spec.law, spec.gamma_shape, rng);
    Matrix x = z * spec.gamma.transpose();
    x.rowwise() += spec.mu.transpose();
    return DataMatrix(std::move(x));
}

DataMatrix generate_diagonal_normal(const Vector& mu, const Vector& variances, Index n, RngStream& rng) {
    require(mu.size() == variances.size(), "generate_diagonal_normal: length mismatch");
    require((variances.array() >= 0).all(), "generate_diagonal_normal: negative variance");
    const Index p = mu.size();
    const Vector sd = variances.cwiseSqrt();
    Matrix x(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) x(i, j) = mu(j) + sd(j) * rng.normal();
    return DataMatrix(std::move(x));
}

}  // namespace hidim

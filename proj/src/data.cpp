#include "hidim/data.hpp"

#include "hidim/error.hpp"

namespace hidim {

DataMatrix::DataMatrix(Matrix values) : values_(std::move(values)) {
    require(values_.rows() >= 1 && values_.cols() >= 1, "data matrix must have at least one row and one column");
    require(values_.allFinite(), "data matrix contains non-finite entries");
}

TwoSample::TwoSample(DataMatrix x, DataMatrix y) : x_(std::move(x)), y_(std::move(y)) {
    require(x_.p() == y_.p(), "samples have different numbers of variables (" + std::to_string(x_.p()) + " vs " +
                                  std::to_string(y_.p()) + ")");
    require(x_.n() >= 2 && y_.n() >= 2, "each sample needs at least two observations");
}

Vector sample_mean(const DataMatrix& m) { return m.values().colwise().mean().transpose(); }

Matrix centered(const Matrix& values) { return values.rowwise() - values.colwise().mean(); }

Matrix sample_covariance(const DataMatrix& m, bool biased) {
    const double divisor = biased ? static_cast<double>(m.n()) : static_cast<double>(m.n() - 1);
    require(divisor > 0, "sample covariance needs at least two observations");
    Matrix c = centered(m.values());
    return (c.transpose() * c) / divisor;
}

Matrix pooled_residuals(const TwoSample& s) {
    Matrix r(s.n() + s.m(), s.p());
    r.topRows(s.n()) = centered(s.x().values());
    r.bottomRows(s.m()) = centered(s.y().values());
    return r;
}

Matrix pooled_covariance(const TwoSample& s, bool biased) {
    const double total = static_cast<double>(s.n() + s.m());
    const double divisor = biased ? total : total - 2.0;
    require(divisor > 0, "pooled covariance needs n + m >= 3");
    Matrix r = pooled_residuals(s);
    return (r.transpose() * r) / divisor;
}

}  // namespace hidim

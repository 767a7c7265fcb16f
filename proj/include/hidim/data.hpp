#pragma once

#include <Eigen/Dense>

namespace hidim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Observations in rows, variables in columns. Entries are checked to be finite.
class DataMatrix {
public:
    DataMatrix() = default;
    explicit DataMatrix(Matrix values);

    const Matrix& values() const { return values_; }
    Index n() const { return values_.rows(); }
    Index p() const { return values_.cols(); }

private:
    Matrix values_;
};

class TwoSample {
public:
    TwoSample(DataMatrix x, DataMatrix y);

    const DataMatrix& x() const { return x_; }
    const DataMatrix& y() const { return y_; }
    Index n() const { return x_.n(); }
    Index m() const { return y_.n(); }
    Index p() const { return x_.p(); }

private:
    DataMatrix x_;
    DataMatrix y_;
};

Vector sample_mean(const DataMatrix& m);

// Rows minus the column means.
Matrix centered(const Matrix& values);

// Divisor n when biased, n-1 otherwise.
Matrix sample_covariance(const DataMatrix& m, bool biased);

// Within-group centered cross products over n+m-2, or over n+m when biased.
Matrix pooled_covariance(const TwoSample& s, bool biased = false);

// Stacked within-group centered rows, (n+m) x p. Its Gram matrix divided by n+m-2
// is the pooled covariance, which lets traces be computed on the smaller side.
Matrix pooled_residuals(const TwoSample& s);

}  // namespace hidim

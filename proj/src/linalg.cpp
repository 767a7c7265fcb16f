#include "hidim/linalg.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "hidim/error.hpp"

namespace hidim {

bool is_symmetric(const Matrix& a, double rel_tol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(a.norm(), 1e-300);
    return (a - a.transpose()).norm() <= rel_tol * scale;
}

SymEigen sym_eigen(const Matrix& a) {
    require(a.rows() == a.cols(), "sym_eigen: matrix is not square");
    require(is_symmetric(a), "sym_eigen: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success) throw NumericalError("sym_eigen: eigen-solver did not converge");

    const Index p = a.rows();
    std::vector<Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Index{0});
    const Vector& ev = solver.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return ev(i) > ev(j); });

    SymEigen out{Vector(p), Matrix(p, p)};
    for (Index k = 0; k < p; ++k) {
        const Index src = order[static_cast<std::size_t>(k)];
        out.values(k) = ev(src);
        Vector v = solver.eigenvectors().col(src);
        Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        out.vectors.col(k) = v;
    }
    return out;
}

double trace_product(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b.transpose()).sum(); }

double trace_gram_squared(const Matrix& c, double divisor) {
    // tr((C^T C)^2) == tr((C C^T)^2) == squared Frobenius norm of either Gram matrix.
    Matrix g = c.rows() <= c.cols() ? Matrix(c * c.transpose()) : Matrix(c.transpose() * c);
    return g.squaredNorm() / (divisor * divisor);
}

double log_det_spd(const Matrix& a) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) throw NumericalError("matrix is not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace hidim

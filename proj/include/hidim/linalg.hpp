#pragma once

#include "hidim/data.hpp"

namespace hidim {

struct SymEigen {
    Vector values;   // descending
    Matrix vectors;  // columns are orthonormal eigenvectors
};

// Eigenvalues sorted descending; equal eigenvalues keep the solver's original index
// order. Each eigenvector is signed so its largest-magnitude entry is positive.
SymEigen sym_eigen(const Matrix& a);

// tr(AB) without forming the product.
double trace_product(const Matrix& a, const Matrix& b);

// tr(A^2) for A = C^T C / divisor, computed on whichever of C C^T or C^T C is smaller.
double trace_gram_squared(const Matrix& c, double divisor);

// log det of a symmetric positive definite matrix; throws NumericalError otherwise.
double log_det_spd(const Matrix& a);

bool is_symmetric(const Matrix& a, double rel_tol = 1e-10);

}  // namespace hidim

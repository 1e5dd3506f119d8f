#pragma once

#include <cstddef>

#include "cellrobust/matrix.hpp"

namespace cellrobust {

/// Thin SVD M = U * diag(singular_values) * V^T with nonincreasing
/// singular values. Columns of U (n x k) and V (d x k) are orthonormal.
/// Sign convention: the largest-magnitude entry of each right singular
/// vector is positive, so decompositions are reproducible across runs.
struct SvdResult {
    Matrix u;
    Vector singular_values;
    Matrix v;

    Matrix reconstruct() const;
};

/// Full decomposition, k = min(n, d). Rejects non-finite input.
SvdResult svd(const Matrix& m);

/// Leading-k truncation of the full decomposition.
SvdResult svd(const Matrix& m, std::size_t k);

/// Numerical rank: count of singular values above
/// max(n,d) * eps * sigma_max.
std::size_t svd_rank(const SvdResult& s, std::size_t n, std::size_t d);

struct SymEig {
    Vector values;   // ascending
    Matrix vectors;  // column j pairs with values[j]
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
SymEig sym_eig(const Matrix& s);

double min_eigenvalue(const Matrix& s);

/// S + c*I with the smallest c >= 0 making lambda_min >= floor.
/// Throws DataError if S is not symmetric (tolerance 1e-10 relative
/// to max(1, max|S|)).
Matrix psd_repair(const Matrix& s, double floor);

/// Lower Cholesky factor of a positive definite matrix; throws DataError
/// when a pivot is not strictly positive.
Matrix cholesky(const Matrix& s);

Vector cholesky_solve(const Matrix& lower, const Vector& b);
Matrix cholesky_solve(const Matrix& lower, const Matrix& b);

/// log(det(S)) from a lower Cholesky factor.
double cholesky_logdet(const Matrix& lower);

/// (x - mu)^T Sigma^{-1} (x - mu). Requires lambda_min(Sigma) > 1e-12;
/// the error message names the offending eigenvalue.
double mahalanobis_sq(const Vector& x, const Vector& mu, const Matrix& sigma);

/// Largest principal angle (radians) between the column spans of two
/// column-orthonormal matrices of equal shape.
double max_principal_angle(const Matrix& a, const Matrix& b);

}  // namespace cellrobust

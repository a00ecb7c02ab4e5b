#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "fanlasso/matrix.hpp"

namespace fanlasso {

// Result of a symmetric eigendecomposition restricted to the leading part of
// the spectrum. Invariants (checked by check_eigen_result and asserted in the
// test suites):
//   - eigenvalues sorted non-increasing, all finite
//   - eigenvector columns orthonormal: |V^T V - I|_max <= tol
//   - residual bound per pair: ||A v_i - lambda_i v_i||_2 <= tol * ||A||_F
struct EigenResult {
  std::vector<double> eigenvalues;  // k entries, non-increasing
  Matrix eigenvectors;              // p x k, orthonormal columns
};

inline constexpr double kDefaultEigTol = 1e-10;

// Top-k eigenpairs of a symmetric matrix.
//
// Full-spectrum solver: Householder reduction to tridiagonal form followed by
// implicit-shift QL iterations with accumulated rotations, then the leading k
// pairs are selected. Each eigenvector is sign-normalized so its entry of
// largest magnitude (earliest index on ties) is positive.
//
// Preconditions: A square with |A - A^T|_max <= tol * |A|_max, 1 <= k <= p.
// Throws ValidationError on shape/symmetry violations and ConvergenceError if
// the per-eigenvalue sweep cap (50 sweeps) is exhausted.
EigenResult sym_eig_topk(const Matrix& a, std::size_t k, double tol = kDefaultEigTol);

// Largest residual / orthonormality defect of a decomposition, relative to
// the bounds above. Returns true when both invariants hold.
bool check_eigen_result(const Matrix& a, const EigenResult& r, double tol = kDefaultEigTol);

double frobenius_norm(const Matrix& a);

// All singular values of A, non-increasing, computed through the eigenvalues
// of the smaller Gram matrix (A^T A or A A^T).
std::vector<double> singular_values(const Matrix& a);

// (smallest, largest) singular value of A.
std::pair<double, double> singular_extremes(const Matrix& a);

// Distance between the column spans of two orthonormal p x r bases:
//   d(V1, V2) = sqrt( sum_i 2 (1 - sigma_i) ),  sigma_i = singular values of V1^T V2.
// This equals the orthogonal-Procrustes residual min_R ||V1 R - V2||_F and
// lies in [0, sqrt(2 r)]. Inputs must have orthonormal columns (checked to
// 1e-8) and matching shapes.
double subspace_distance(const Matrix& v1, const Matrix& v2);

}  // namespace fanlasso

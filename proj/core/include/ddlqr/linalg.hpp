#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "ddlqr/errors.hpp"

namespace ddlqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Symmetry check with a relative tolerance (default matches the SymMatrix
// invariant used across the library).
bool is_symmetric(const Matrix& S, double rel_tol = 1e-12);

// Force exact symmetry: (S + S^T) / 2.
Matrix sym_part(const Matrix& S);

struct SymEig {
    Vector eigenvalues;   // ascending
    Matrix eigenvectors;  // orthonormal columns
};

// Eigendecomposition of a symmetric matrix: S = V diag(lambda) V^T.
SymEig sym_eig(const Matrix& S);

// Lower-triangular L with L L^T = S. Throws NotPositiveDefinite.
Matrix cholesky(const Matrix& S);

// Largest eigenvalue modulus of a square (not necessarily symmetric) matrix.
double spectral_radius(const Matrix& A);

// Solves Sigma = A Sigma A^T + Q for Schur-stable A by doubling iteration.
// Throws Unstable when rho(A) >= 1 - 1e-9.
Matrix solve_discrete_lyapunov(const Matrix& A, const Matrix& Q);

struct DareSolution {
    Matrix P;  // stabilizing Riccati solution
    Matrix K;  // state-feedback gain for u = -K x
};

// Discrete algebraic Riccati equation by fixed-point iteration.
// P = Q + A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A,
// K = (R + B^T P B)^{-1} B^T P A.
DareSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q,
                        const Matrix& R);

// Symmetric vectorization with sqrt(2)-scaled off-diagonals, so that
// <S, T> = svec(S) . svec(T). Lower triangle in column order:
// (0,0),(1,0),...,(d-1,0),(1,1),...
Vector svec(const Matrix& S);
Matrix smat(const Vector& v);

// Dimension d such that d(d+1)/2 = len; throws DimensionMismatch otherwise.
int smat_dim(int len);
inline int svec_len(int d) { return d * (d + 1) / 2; }

// Frobenius-norm relative residual helper used by tests and verifiers:
// ||X - Y||_F / (1 + ||Y||_F).
double rel_residual(const Matrix& X, const Matrix& Y);

}  // namespace ddlqr

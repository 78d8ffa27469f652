#include "ddlqr/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace ddlqr {

bool is_symmetric(const Matrix& S, double rel_tol) {
    if (S.rows() != S.cols()) return false;
    const double scale = 1.0 + S.cwiseAbs().maxCoeff();
    return ((S - S.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale);
}

Matrix sym_part(const Matrix& S) { return 0.5 * (S + S.transpose()); }

SymEig sym_eig(const Matrix& S) {
    if (S.rows() != S.cols())
        throw DimensionMismatch("sym_eig: matrix must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym_part(S));
    if (es.info() != Eigen::Success)
        throw NonConvergence("sym_eig: eigensolver did not converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

Matrix cholesky(const Matrix& S) {
    if (S.rows() != S.cols())
        throw DimensionMismatch("cholesky: matrix must be square");
    Eigen::LLT<Matrix> llt(sym_part(S));
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("cholesky: matrix is not positive definite");
    return llt.matrixL();
}

double spectral_radius(const Matrix& A) {
    if (A.rows() != A.cols())
        throw DimensionMismatch("spectral_radius: matrix must be square");
    Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw NonConvergence("spectral_radius: eigensolver did not converge");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix solve_discrete_lyapunov(const Matrix& A, const Matrix& Q) {
    if (A.rows() != A.cols() || Q.rows() != Q.cols() || A.rows() != Q.rows())
        throw DimensionMismatch("solve_discrete_lyapunov: inconsistent shapes");
    if (spectral_radius(A) >= 1.0 - 1e-9)
        throw Unstable("solve_discrete_lyapunov: spectral radius >= 1");

    // Smith iteration with doubling: Sigma_{k+1} = Sigma_k + A_k Sigma_k A_k^T,
    // A_{k+1} = A_k^2. Converges quadratically for Schur-stable A.
    Matrix sigma = sym_part(Q);
    Matrix Ak = A;
    for (int it = 0; it < 200; ++it) {
        Matrix next = sigma + Ak * sigma * Ak.transpose();
        Matrix Anext = Ak * Ak;
        const double delta = (next - sigma).norm();
        sigma = sym_part(next);
        Ak = Anext;
        if (delta <= 1e-14 * (1.0 + sigma.norm())) return sigma;
    }
    throw NonConvergence("solve_discrete_lyapunov: iteration cap reached");
}

DareSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q,
                        const Matrix& R) {
    const auto n = A.rows();
    if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
        R.rows() != B.cols() || R.cols() != B.cols())
        throw DimensionMismatch("solve_dare: inconsistent shapes");

    Matrix P = sym_part(Q);
    const int max_iter = 10000;
    for (int it = 0; it < max_iter; ++it) {
        Matrix BtP = B.transpose() * P;
        Matrix gram = R + BtP * B;
        Eigen::LDLT<Matrix> ldlt(sym_part(gram));
        if (ldlt.info() != Eigen::Success)
            throw NotStabilizable("solve_dare: R + B'PB not positive definite");
        Matrix K = ldlt.solve(BtP * A);
        Matrix next = sym_part(Q + A.transpose() * P * A -
                               A.transpose() * P * B * K);
        const double change = (next - P).norm() / (1.0 + next.norm());
        P = next;
        if (!P.allFinite())
            throw NotStabilizable("solve_dare: iteration diverged");
        if (change <= 1e-12) {
            Matrix Kfinal = Eigen::LDLT<Matrix>(
                                sym_part(R + B.transpose() * P * B))
                                .solve(B.transpose() * P * A);
            return {P, Kfinal};
        }
    }
    throw NonConvergence("solve_dare: iteration cap reached");
}

Vector svec(const Matrix& S) {
    if (S.rows() != S.cols())
        throw DimensionMismatch("svec: matrix must be square");
    const int d = static_cast<int>(S.rows());
    Vector v(svec_len(d));
    const double r2 = std::sqrt(2.0);
    int k = 0;
    for (int j = 0; j < d; ++j) {
        v[k++] = S(j, j);
        for (int i = j + 1; i < d; ++i) v[k++] = r2 * 0.5 * (S(i, j) + S(j, i));
    }
    return v;
}

int smat_dim(int len) {
    const int d = static_cast<int>((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0 + 0.5);
    if (d * (d + 1) / 2 != len)
        throw DimensionMismatch("smat: length is not a triangular number");
    return d;
}

Matrix smat(const Vector& v) {
    const int d = smat_dim(static_cast<int>(v.size()));
    Matrix S(d, d);
    const double r2 = std::sqrt(2.0);
    int k = 0;
    for (int j = 0; j < d; ++j) {
        S(j, j) = v[k++];
        for (int i = j + 1; i < d; ++i) {
            S(i, j) = v[k] / r2;
            S(j, i) = S(i, j);
            ++k;
        }
    }
    return S;
}

double rel_residual(const Matrix& X, const Matrix& Y) {
    return (X - Y).norm() / (1.0 + Y.norm());
}

}  // namespace ddlqr

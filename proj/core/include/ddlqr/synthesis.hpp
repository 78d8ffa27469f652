#pragma once

#include <cstdint>
#include <string>

#include "ddlqr/data.hpp"
#include "ddlqr/linalg.hpp"
#include "ddlqr/sdp.hpp"

namespace ddlqr {

// Solution of the stabilization program: a gain K = U0 F Y^{-1} together
// with the matrices certifying mean-square stability of the closed loop.
struct StabilizationCertificate {
    sdp::SdpStatus status = sdp::SdpStatus::NumericalFailure;
    Matrix K;  // m x n
    Matrix Y;  // n x n, positive definite
    Matrix F;  // N x n
    Matrix G;  // F Y^{-1}, satisfies D0 G = [K; I]
    double gamma = 0.0;  // 1/gamma weights the contraction margin F'F
    sdp::ResidualReport residuals;  // independent re-check of the program
    std::uint64_t data_seed = 0;

    std::string to_json() const;
};

// Solution of the LQR program: the optimal-cost gain K = U0 F Sigma^{-1}
// plus every auxiliary matrix of the semidefinite program, kept so the
// certificate can be re-verified without re-solving.
struct LqrCertificate {
    sdp::SdpStatus status = sdp::SdpStatus::NumericalFailure;
    Matrix K;      // m x n
    Matrix Sigma;  // n x n, certified steady-state covariance bound
    Matrix H;      // N x N, stands for F Sigma^{-1} F'
    Matrix S;      // n x n, stands for Sigma V^{-1} Sigma
    Matrix Z;      // N x N, stands for M K V K' M'
    Matrix E;      // N x N, stands for F S^{-1} F'
    Matrix F;      // N x n
    Matrix M;      // N x m, data annihilator with U0 M = I, Y0 M = 0
    Matrix G;      // F Sigma^{-1}
    double beta = 0.0;  // certified cost bound
    bool tied_ZE = false;
    sdp::ResidualReport residuals;
    std::uint64_t data_seed = 0;

    std::string to_json() const;
};

struct LqrOptions {
    // Substitute Z := E everywhere (a valid simplification since Z = E
    // trivially satisfies the annihilation equality).
    bool tie_ZE = false;
    // The LQR program loses strict complementarity at its optimum (E and Z
    // sit on the cone boundary), which caps the attainable duality gap in
    // double precision around 1e-4 even though feasibility reaches 1e-9.
    // The default gap tolerance reflects that; every returned certificate
    // is re-verified independently of the solver, so a looser gap only
    // affects how close beta is to its minimum (well below the spread the
    // measurement noise induces across data sets).
    sdp::SolveSettings solve{.gap_tol = 1e-5};
};

// Least-norm M with U0 M = I_m and Y0 M = 0, i.e. D0 M = [I; 0].
// Throws MInfeasible when the stacked system is inconsistent (the data
// cannot parameterize the input matrix).
Matrix precheck_M(const DataSet& ds);

// Stabilizing-gain synthesis. Minimizes gamma under the normalization
// Tr(Y) = n: the stability block charges the closed loop a contraction
// margin (1/gamma) F'F, so the smallest feasible gamma yields the
// certificate that is most robust to the measurement noise in the data.
// Throws NotInformative, InfeasibleProgram, or NumericalFailure.
StabilizationCertificate stabilize(const DataSet& ds, const Matrix& W,
                                   const Matrix& V,
                                   const sdp::SolveSettings& settings = {});

// LQR synthesis: minimizes the certified cost bound beta.
// Throws NotInformative, MInfeasible, InfeasibleProgram, NumericalFailure.
LqrCertificate lqr_synthesize(const DataSet& ds, const Matrix& W,
                              const Matrix& V, const Matrix& Q,
                              const Matrix& R, const LqrOptions& opts = {});

struct GainExtraction {
    Matrix K;
    Matrix G;
};

// Recomputes K (and the diagnostic G) from the certificate matrices alone.
// Throws SingularCertificate when Y (resp. Sigma) is numerically singular.
GainExtraction extract_gain(const StabilizationCertificate& cert,
                            const DataSet& ds);
GainExtraction extract_gain(const LqrCertificate& cert, const DataSet& ds);

// Data-based closed-loop covariance map
//   T(X) = Y1 G X G' Y1' + Tr(G X G')(W+V) + W
//        + Y1 M K V K' M' Y1' + Tr(M K V K' M')(W+V).
// Its fixed point bounds the true steady-state covariance.
Matrix covariance_map(const DataSet& ds, const Matrix& W, const Matrix& V,
                      const Matrix& G, const Matrix& M, const Matrix& K,
                      const Matrix& X);

struct FixedPointCheck {
    bool converged = false;
    bool monotone = false;   // iterates from 0 were nondecreasing (PSD order)
    bool bounded = false;    // limit <= Sigma + tol*I
    Matrix limit;
    int iterations = 0;
};

FixedPointCheck covariance_fixed_point(const DataSet& ds, const Matrix& W,
                                       const Matrix& V,
                                       const LqrCertificate& cert,
                                       double tol = 1e-6,
                                       int max_iter = 20000);

// Independent re-verification of every invariant a certificate claims,
// computed from the stored matrices only (no solver state involved).
struct StabilizationVerification {
    double eq_residual = 0.0;    // max|Y0 F - Y| and |Tr(Y) - n|
    double lmi_min_eig = 0.0;    // negated stability block, want >= -tol
    double trace_slack = 0.0;    // Tr((V+W)^{-1} Y) - gamma n^2, want >= -tol
    double y_min_eig = 0.0;
    bool ok(double tol = 1e-6) const {
        return eq_residual <= tol && lmi_min_eig >= -tol &&
               trace_slack >= -tol && y_min_eig > 0.0;
    }
};

StabilizationVerification verify(const DataSet& ds, const Matrix& W,
                                 const Matrix& V,
                                 const StabilizationCertificate& cert);

struct LqrVerification {
    double eq_residual = 0.0;    // Y0F-Sigma, U0M-I, Y0M, U0(Z-E)U0'
    double lmi_min_eig = 0.0;    // min eig over blocks (covariance + Schur)
    double cost_slack = 0.0;     // beta - certified cost, want >= -tol
    double sigma_min_eig = 0.0;  // want >= 0.9 * lambda_min(W)
    FixedPointCheck fixed_point;
    bool ok(double lambda_min_W, double tol = 1e-6) const {
        return eq_residual <= tol && lmi_min_eig >= -1e-7 &&
               cost_slack >= -tol && sigma_min_eig >= 0.9 * lambda_min_W &&
               fixed_point.converged && fixed_point.monotone &&
               fixed_point.bounded;
    }
};

LqrVerification verify(const DataSet& ds, const Matrix& W, const Matrix& V,
                       const Matrix& Q, const Matrix& R,
                       const LqrCertificate& cert);

}  // namespace ddlqr

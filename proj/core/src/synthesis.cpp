#include "ddlqr/synthesis.hpp"

#include <cstdio>
#include <limits>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "json_util.hpp"

namespace ddlqr {

namespace {

using sdp::AffineMatrixExpr;
using sdp::SdpProblem;
using sdp::SdpSolution;
using sdp::SdpStatus;
using sdp::VarId;

// Appends -coeff-weighted Tr(P * X) to a 1x1 expression: sum_i P.row(i) X e_i.
void add_trace_term(AffineMatrixExpr& e, const Matrix& P, VarId X,
                    double coeff = 1.0) {
    const int d = static_cast<int>(P.cols());
    for (int i = 0; i < d; ++i) {
        Matrix R = Matrix::Zero(d, 1);
        R(i, 0) = 1.0;
        e.add_term(P.row(i), X, R, false, coeff);
    }
}

void require_informative(const DataSet& ds) {
    const auto r = informativity_rank(ds);
    if (!r.ok)
        throw NotInformative("data matrix rank " + std::to_string(r.rank) +
                             " < m + n = " + std::to_string(ds.m() + ds.n()));
}

Matrix require_spd_inverse(const Matrix& M, const char* what) {
    if (!is_symmetric(M, 1e-10))
        throw NotPositiveDefinite(std::string(what) + " must be symmetric");
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite(std::string(what) +
                                  " must be positive definite");
    return llt.solve(Matrix::Identity(M.rows(), M.cols()));
}

[[noreturn]] void raise_solver_status(SdpStatus status, const char* which) {
    switch (status) {
        case SdpStatus::PrimalInfeasible:
            throw InfeasibleProgram(std::string(which) +
                                    ": program is infeasible");
        case SdpStatus::DualInfeasible:
            throw InfeasibleProgram(std::string(which) +
                                    ": program is unbounded");
        default:
            throw NumericalFailure(std::string(which) +
                                   ": solver did not converge (" +
                                   sdp::to_string(status) + ")");
    }
}

// K = U0 * F * Yinv for positive definite Y.
GainExtraction gain_from(const Matrix& U0, const Matrix& F, const Matrix& Y,
                         const char* what) {
    const auto eig = sym_eig(sym_part(Y));
    if (eig.eigenvalues.minCoeff() < 1e-10 * std::max(1.0, eig.eigenvalues.maxCoeff()))
        throw SingularCertificate(std::string(what) +
                                  ": certificate matrix is numerically singular");
    Eigen::LLT<Matrix> llt(sym_part(Y));
    GainExtraction out;
    out.G = llt.solve(F.transpose()).transpose();  // F Y^{-1}
    out.K = U0 * out.G;
    return out;
}

nlohmann::json residuals_to_json(const sdp::ResidualReport& r) {
    nlohmann::json j;
    j["eq_residuals"] = r.eq_residuals;
    j["psd_min_eigs"] = r.psd_min_eigs;
    j["objective"] = r.objective;
    j["max_eq_residual"] = r.max_eq_residual;
    j["min_psd_eig"] = r.min_psd_eig;
    return j;
}

}  // namespace

Matrix precheck_M(const DataSet& ds) {
    ds.validate();
    const int n = ds.n(), m = ds.m();
    Matrix rhs = Matrix::Zero(m + n, m);
    rhs.topRows(m) = Matrix::Identity(m, m);
    const Matrix D0 = ds.D0();
    // Least-norm solution of D0 M = [I; 0].
    const Matrix M = D0.completeOrthogonalDecomposition().solve(rhs);
    const double resid = (D0 * M - rhs).cwiseAbs().maxCoeff();
    if (resid > 1e-9 * (1.0 + D0.cwiseAbs().maxCoeff()))
        throw MInfeasible(
            "no M with U0 M = I, Y0 M = 0 exists; data cannot parameterize "
            "the input matrix (residual " +
            std::to_string(resid) + ")");
    return M;
}

StabilizationCertificate stabilize(const DataSet& ds, const Matrix& W,
                                   const Matrix& V,
                                   const sdp::SolveSettings& settings) {
    ds.validate();
    require_informative(ds);
    const int n = ds.n(), N = ds.N();
    const Matrix P = require_spd_inverse(W + V, "W + V");

    SdpProblem p;
    const VarId Y = p.declare_var(n, n, true);
    const VarId F = p.declare_var(N, n);
    const VarId g = p.declare_var(1, 1);

    // Stability LMI (negated so it reads >= 0):
    //   [  Y      -(Y1 F)'   -F' ]
    //   [ -Y1 F     Y         0  ]  >= 0.
    //   [ -F        0       g I  ]
    auto eY = AffineMatrixExpr::zero(n, n);
    eY.add_var(Y, n, n);
    auto eY1Ft = AffineMatrixExpr::zero(n, n);
    eY1Ft.add_term(Matrix::Identity(n, n), F, ds.Y1.transpose(), true, -1.0);
    auto eY1F = AffineMatrixExpr::zero(n, n);
    eY1F.add_term(ds.Y1, F, Matrix::Identity(n, n), false, -1.0);
    auto eFt = AffineMatrixExpr::zero(n, N);
    eFt.add_term(Matrix::Identity(n, n), F, Matrix::Identity(N, N), true,
                 -1.0);
    auto eF = AffineMatrixExpr::zero(N, n);
    eF.add_term(Matrix::Identity(N, N), F, Matrix::Identity(n, n), false,
                -1.0);
    auto egI = AffineMatrixExpr::zero(N, N);
    egI.add_scalar_term(Matrix::Identity(N, N), g);
    p.constrain_psd(sdp::block_expr({
        {eY, eY1Ft, eFt},
        {eY1F, eY, AffineMatrixExpr::zero(n, N)},
        {eF, AffineMatrixExpr::zero(N, n), egI},
    }));

    // Y0 F = Y.
    auto eq = AffineMatrixExpr::zero(n, n);
    eq.add_term(ds.Y0, F, Matrix::Identity(n, n));
    eq.add_var(Y, n, n, false, -1.0);
    p.constrain_eq(eq);

    // Tr((V+W)^{-1} Y) - g n^2 >= 0.
    auto trace_ineq = AffineMatrixExpr::zero(1, 1);
    add_trace_term(trace_ineq, P, Y);
    trace_ineq.add_scalar_term(
        -static_cast<double>(n) * n * Matrix::Identity(1, 1), g);
    p.constrain_psd(trace_ineq);

    // g >= 1e-9 keeps the margin strictly positive.
    auto gpos = AffineMatrixExpr::constant_expr(-1e-9 * Matrix::Identity(1, 1));
    gpos.add_var(g, 1, 1);
    p.constrain_psd(gpos);

    // Normalization Tr(Y) = n removes the scaling freedom of the program.
    auto trY = AffineMatrixExpr::constant_expr(
        -static_cast<double>(n) * Matrix::Identity(1, 1));
    add_trace_term(trY, Matrix::Identity(n, n), Y);
    p.constrain_eq(trY);

    // Minimize gamma. The stability block reads
    //   Y >= (Y1 F)' Y^{-1} (Y1 F) + (1/gamma) F'F,
    // so the smaller gamma is, the larger the contraction margin (1/gamma)F'F
    // that absorbs the noise corrupting Y1 and Y0. Small gamma is therefore
    // the robust direction; maximizing it merely saturates the trace bound
    // with a certificate that tolerates no noise at all.
    p.add_objective(Matrix::Identity(1, 1), g);

    const SdpSolution sol = sdp::solve(p, settings);
    if (sol.status != SdpStatus::Optimal)
        raise_solver_status(sol.status, "stabilize");

    StabilizationCertificate cert;
    cert.status = sol.status;
    cert.Y = sym_part(sol.values.at(Y));
    cert.F = sol.values.at(F);
    cert.gamma = sol.values.at(g)(0, 0);
    const auto gain = gain_from(ds.U0, cert.F, cert.Y, "stabilize");
    cert.K = gain.K;
    cert.G = gain.G;
    cert.residuals = sdp::check_solution(p, sol);
    cert.data_seed = ds.seed;
    return cert;
}

LqrCertificate lqr_synthesize(const DataSet& ds, const Matrix& W,
                              const Matrix& V, const Matrix& Q,
                              const Matrix& R, const LqrOptions& opts) {
    ds.validate();
    require_informative(ds);
    const int n = ds.n(), m = ds.m(), N = ds.N();
    require_spd_inverse(W, "W");
    require_spd_inverse(V, "V");
    require_spd_inverse(R, "R");
    if (!is_symmetric(Q, 1e-10) ||
        sym_eig(sym_part(Q)).eigenvalues.minCoeff() < -1e-10)
        throw NotPositiveDefinite("Q must be symmetric positive semidefinite");
    const Matrix M0 = precheck_M(ds);

    // Internal rescaling: every constraint is homogeneous of degree one in
    // (Sigma, H, S, E, Z, F, beta), so dividing them all by s0 only replaces
    // the constants W and V by W/s0 and V/s0. Choosing s0 at the noise scale
    // puts the covariance variables at O(1), which the interior-point solver
    // needs: unscaled, the whole program lives at the 1e-6..1e-4 scale of the
    // noise and the final iterations stall before the relative tolerances
    // are met. Solutions are multiplied back by s0 on extraction.
    const double s0 = (W + V).trace() / static_cast<double>(n);
    const Matrix Ws = W / s0;
    const Matrix Vs = V / s0;

    // Second change of variables: F, M scale like the data pseudoinverse
    // (F = G Sigma with D0 G = [K; I]) and H, Z, E like its square, so when
    // D0 is poorly conditioned the solution norm is ~1/sigma_min(D0)^2 and
    // the homogeneous embedding loses exactly that factor of accuracy.
    // Substituting F = a F', M = a M', H = a^2 H', Z = a^2 Z', E = a^2 E'
    // is a diagonal congruence on every Schur block (so the blocks stay
    // balanced) and keeps all decision variables at O(1).
    const Eigen::JacobiSVD<Matrix> d0svd(ds.D0());
    const double a =
        std::max(1.0, 1.0 / d0svd.singularValues()(m + n - 1));
    const Matrix aY0 = a * ds.Y0;
    const Matrix aY1 = a * ds.Y1;
    const Matrix aU0 = a * ds.U0;

    // The program minimizing beta subject to the constraints alone has an
    // infimum it never attains: nothing charges S from above, so inflating
    // S weakens the lower bound E >= F S^{-1} F' until E (and with it Z)
    // vanishes, deleting both the cost term Tr(R U0 E U0') and the Z noise
    // load from the covariance inequality. The limit point certifies nothing
    // about measurement noise entering through the control channel and
    // regularly yields destabilizing gains. The sound coupling
    // E >= F Sigma^{-1} V Sigma^{-1} F' is not jointly convex, so instead the
    // intended tight point S = Sigma V^{-1} Sigma is selected by a short
    // outer fixed-point iteration: each pass solves the SDP with S pinned to
    // the previous pass's Sigma V^{-1} Sigma and stops once Sigma is
    // consistent with the pin. The returned certificate satisfies every
    // original constraint; the iteration only chooses which feasible point
    // is reported. Two further selections keep the solution meaningful and
    // the embedding bounded:
    //   - Z >= (M U0) E (M U0)' for the (unique, pinned) annihilator M: this
    //     is the value Z stands for, and it guarantees the data-based
    //     covariance map certifies the closed loop (Z alone is otherwise
    //     free to dodge the covariance load in directions Y1 barely sees).
    //   - tiny trace penalties on E and H bound their cost-flat PSD
    //     directions (everything orthogonal to the rank-m form U0' R U0).
    const Matrix VsInv = require_spd_inverse(Vs, "V");
    const Matrix P0 = M0 * ds.U0;  // oblique projector onto range(M)

    struct Build {
        SdpProblem p;
        VarId beta{}, M{}, Sigma{}, H{}, E{}, F{}, tHZ{};
    };
    // Sbar == nullptr builds the preliminary program that drops E, Z and S
    // altogether (no measurement-noise load through the control channel).
    // Its Sigma underestimates the fixed point but lands at the right scale,
    // which is all the initial pin needs. eEst estimates the optimal norm of
    // E; it balances the Schur block that couples E to the (small) pinned S,
    // whose raw entries differ by orders of magnitude.
    auto build = [&](const Matrix* Sbar, double eEst) {
        const bool prelim = Sbar == nullptr;
        Build b;
        SdpProblem& p = b.p;
        const VarId beta = b.beta = p.declare_var(1, 1);
        const VarId Sigma = b.Sigma = p.declare_var(n, n, true);
        const VarId H = b.H = p.declare_var(N, N, true);
        b.F = p.declare_var(N, n);
        const VarId F = b.F;
        const VarId tHZ = b.tHZ = p.declare_var(1, 1);  // Tr(H) + Tr(Z)

        const VarId M = b.M = prelim ? beta : p.declare_var(N, m);
        const VarId E = b.E = prelim ? beta : p.declare_var(N, N, true);

        // Z is not a free variable: it stands for (M U0) E (U0' M') — with
        // M pinned to the least-norm annihilator M0 that value is linear in
        // E, so Z is substituted out everywhere. (Keeping it free both
        // reopens the degenerate direction where Z dodges the covariance
        // load, and adds a PSD block that collapses to zero rank at the
        // optimum, which wrecks the interior-point scaling.) With U0 M0 = I
        // the substitution satisfies U0 Z U0' = U0 E U0' identically, and
        // Z >= 0 follows from E >= 0. Under the Z := E tie-in the
        // substitution is the identity.
        const Matrix ZL = opts.tie_ZE ? Matrix::Identity(N, N) : P0;

        // tHZ = Tr(H) + Tr(Z), with Tr(Z) = Tr(ZL' ZL E).
        auto trdef = AffineMatrixExpr::zero(1, 1);
        add_trace_term(trdef, Matrix::Identity(N, N), H);
        if (!prelim) add_trace_term(trdef, ZL.transpose() * ZL, E);
        trdef.add_var(tHZ, 1, 1, false, -1.0);
        p.constrain_eq(trdef);

        // Covariance inequality (negated, in scaled units):
        //   Sigma - W/s0 - (aY1)(H+Z)(aY1)' - a^2 Tr(H+Z)(W+V) >= 0.
        // The trace term keeps the unscaled W+V: it already carries one
        // factor of s0 through Tr(H+Z).
        auto cov = AffineMatrixExpr::constant_expr(-Ws);
        cov.add_var(Sigma, n, n);
        cov.add_term(aY1, H, aY1.transpose(), false, -1.0);
        if (!prelim) {
            const Matrix aY1Z = aY1 * ZL;
            cov.add_term(aY1Z, E, aY1Z.transpose(), false, -1.0);
        }
        cov.add_scalar_term(-a * a * (W + V), tHZ);
        p.constrain_psd(cov);

        auto var_expr = [&](VarId v, int r, int c) {
            auto e = AffineMatrixExpr::zero(r, c);
            e.add_var(v, r, c);
            return e;
        };
        auto var_expr_t = [&](VarId v, int r, int c) {
            // transpose of an r x c variable
            auto e = AffineMatrixExpr::zero(c, r);
            e.add_var(v, r, c, true);
            return e;
        };

        // Schur blocks [[E,F],[F',S]], [[H,F],[F',Sigma]],
        // [[S,Sigma],[Sigma,V]].
        p.constrain_psd(sdp::block_expr({
            {var_expr(H, N, N), var_expr(F, N, n)},
            {var_expr_t(F, N, n), var_expr(Sigma, n, n)},
        }));
        if (!prelim) {
            // S is the pinned constant Sbar, not a variable. Both blocks it
            // appears in are balanced by a congruence diag(I, c I) — the
            // constraint is unchanged, but the interior-point scaling sees
            // block entries of comparable size (raw, E and V dwarf Sbar by
            // orders of magnitude and the solver stalls mid-path).
            const double sNorm = std::max(Sbar->norm(), 1e-12);
            const double cE = std::sqrt(std::max(eEst, 1e-12) / sNorm);
            auto fE = AffineMatrixExpr::zero(N, n);
            fE.add_var(F, N, n, false, cE);
            auto fEt = AffineMatrixExpr::zero(n, N);
            fEt.add_var(F, N, n, true, cE);
            p.constrain_psd(sdp::block_expr({
                {var_expr(E, N, N), fE},
                {fEt, AffineMatrixExpr::constant_expr(cE * cE * *Sbar)},
            }));

            const double cS = std::sqrt(std::max(Vs.norm(), 1e-12) / sNorm);
            auto sigS = AffineMatrixExpr::zero(n, n);
            sigS.add_var(Sigma, n, n, false, cS);
            p.constrain_psd(sdp::block_expr({
                {AffineMatrixExpr::constant_expr(cS * cS * *Sbar), sigS},
                {sigS, AffineMatrixExpr::constant_expr(Vs)},
            }));
        }

        // Y0 F = Sigma.
        auto eqF = AffineMatrixExpr::zero(n, n);
        eqF.add_term(aY0, F, Matrix::Identity(n, n));
        eqF.add_var(Sigma, n, n, false, -1.0);
        p.constrain_eq(eqF);

        // U0 M = I, Y0 M = 0.
        if (!prelim) {
            auto eqU =
                AffineMatrixExpr::constant_expr(-Matrix::Identity(m, m));
            eqU.add_term(aU0, M, Matrix::Identity(m, m));
            p.constrain_eq(eqU);
            auto eqY = AffineMatrixExpr::zero(n, m);
            eqY.add_term(ds.Y0, M, Matrix::Identity(m, m));
            p.constrain_eq(eqY);
            // M is otherwise unconstrained, so its components in null(D0)
            // form an unbounded optimal face; pin them to zero (the
            // least-norm M, exactly what precheck_M returns) to keep the
            // optimum bounded.
            if (N > m + n) {
                Eigen::JacobiSVD<Matrix> fullsvd(ds.D0(),
                                                 Eigen::ComputeFullV);
                const Matrix N0 = fullsvd.matrixV().rightCols(N - m - n);
                auto pin = AffineMatrixExpr::zero(N - m - n, m);
                pin.add_term(N0.transpose(), M, Matrix::Identity(m, m));
                p.constrain_eq(pin);
            }
        }

        // beta - Tr(Q Sigma) - Tr(R U0 H U0') - Tr(R U0 E U0') >= 0.
        const Matrix PRU = aU0.transpose() * R * aU0;  // N x N
        auto cost = AffineMatrixExpr::zero(1, 1);
        cost.add_var(beta, 1, 1);
        add_trace_term(cost, Q, Sigma, -1.0);
        add_trace_term(cost, PRU, H, -1.0);
        if (!prelim) add_trace_term(cost, PRU, E, -1.0);
        p.constrain_psd(cost);

        p.add_objective(Matrix::Identity(1, 1), beta);
        // Selection pressure on the cost-flat directions of E and H (with a
        // single input, the genuine charges on E are all rank one, so most
        // of its eigendirections are otherwise free to wander above their
        // lower bound, and the corresponding dual eigenvalues collapse to
        // the pressure scale — too small and the scaling matrices blow up).
        // The pressure only presses both onto bounds that already hold, and
        // beta is reported from its own variable, so the certificate is
        // unaffected beyond a relative ~1e-5 tilt in where beta settles.
        const double tie_eps = 1e-6;
        p.add_objective(tie_eps * Matrix::Identity(N, N), H);
        if (!prelim)
            p.add_objective(tie_eps * Matrix::Identity(N, N), E);
        return b;
    };

    constexpr int kMaxOuter = 40;
    constexpr double kOuterTol = 1e-6;
    // Headroom on the pin: S sits strictly above Sigma V^{-1} Sigma so the
    // coupling Schur block keeps an interior. While the iteration is still
    // moving the headroom stays generous (a pin computed from an undersized
    // Sigma would otherwise make the next pass infeasible, since Sigma only
    // grows as the pin tightens); it then decays toward the floor, whose
    // slack costs a relative 1e-3 on the (already tiny) noise load in the
    // final certificate.
    constexpr double kHeadroomFloor = 1.0 + 1e-3;

    // Initial pin from the preliminary program: its Sigma is at the right
    // scale (a wildly oversized pin lets E collapse onto the cone boundary
    // and stalls the solver before anything converges). The extra factor
    // leaves room for Sigma to grow once the noise load is charged.
    const Build b0 = build(nullptr, 0.0);
    const SdpSolution sol0 = sdp::solve(b0.p, opts.solve);
    if (sol0.status != SdpStatus::Optimal)
        raise_solver_status(sol0.status, "lqr_synthesize");
    const Matrix sigma0 = sym_part(sol0.values.at(b0.Sigma));
    double head = 4.0;
    Matrix pin = sym_part(sigma0 * VsInv * sigma0);
    Matrix Sbar = head * pin;

    // At the tight point E = F S^{-1} F' = G V G' (scaled units), which the
    // previous solve's F and Sigma estimate well enough for block balancing.
    auto estimate_eNorm = [&](const Matrix& Fv, const Matrix& sig) {
        const Matrix G = sig.ldlt().solve(Fv.transpose()).transpose();
        return (G * Vs * G.transpose()).norm();
    };
    double eEst = estimate_eNorm(sol0.values.at(b0.F), sigma0);
    if (opts.solve.verbose)
        std::printf(
            "prelim: a %.3e s0 %.3e |U0| %.3e |Y1| %.3e |sigma0| %.3e "
            "|F0| %.3e |H0| %.3e beta0 %.3e |Sbar| %.3e eEst %.3e\n",
            a, s0, ds.U0.norm(), ds.Y1.norm(), sigma0.norm(),
            sol0.values.at(b0.F).norm(), sol0.values.at(b0.H).norm(),
            sol0.values.at(b0.beta)(0, 0), Sbar.norm(), eEst);

    Matrix prev_sigma;
    int widens = 0;
    for (int outer = 0; outer < kMaxOuter; ++outer) {
        Build b = build(&Sbar, eEst);
        SdpSolution sol = sdp::solve(b.p, opts.solve);
        // An over-tight pin shows up as primal infeasibility; back the
        // headroom off and retry. The schedule below shrinks it again.
        while (sol.status == SdpStatus::PrimalInfeasible && widens < 8) {
            ++widens;
            head *= 4.0;
            Sbar = head * pin;
            b = build(&Sbar, eEst);
            sol = sdp::solve(b.p, opts.solve);
        }
        if (sol.status != SdpStatus::Optimal)
            raise_solver_status(sol.status, "lqr_synthesize");
        const Matrix sigma = sym_part(sol.values.at(b.Sigma));
        const double change =
            outer == 0 ? std::numeric_limits<double>::infinity()
                       : (sigma - prev_sigma).norm() /
                             std::max(1e-12, sigma.norm());
        if (opts.solve.verbose)
            std::printf("outer %2d  |Sigma| %.6e change %.2e head %.4f\n",
                        outer, sigma.norm(), change, head);
        if (change <= kOuterTol && head <= kHeadroomFloor + 1e-9) {
            LqrCertificate cert;
            cert.status = sol.status;
            cert.Sigma = s0 * sigma;
            cert.H = s0 * a * a * sym_part(sol.values.at(b.H));
            cert.S = s0 * Sbar;
            cert.E = s0 * a * a * sym_part(sol.values.at(b.E));
            cert.Z = opts.tie_ZE
                         ? cert.E
                         : Matrix(P0 * cert.E * P0.transpose());
            cert.F = s0 * a * sol.values.at(b.F);
            cert.M = a * sol.values.at(b.M);
            cert.beta = s0 * sol.values.at(b.beta)(0, 0);
            cert.tied_ZE = opts.tie_ZE;
            const auto gain =
                gain_from(ds.U0, cert.F, cert.Sigma, "lqr_synthesize");
            cert.K = gain.K;
            cert.G = gain.G;
            cert.residuals = sdp::check_solution(b.p, sol);
            cert.data_seed = ds.seed;
            return cert;
        }
        prev_sigma = sigma;
        pin = sym_part(sigma * VsInv * sigma);
        head = std::max(kHeadroomFloor, std::pow(head, 0.25));
        Sbar = head * pin;
        eEst = estimate_eNorm(sol.values.at(b.F), sigma);
    }
    throw NumericalFailure(
        "lqr_synthesize: covariance coupling S = Sigma V^{-1} Sigma did not "
        "converge");
}

GainExtraction extract_gain(const StabilizationCertificate& cert,
                            const DataSet& ds) {
    return gain_from(ds.U0, cert.F, cert.Y, "extract_gain");
}

GainExtraction extract_gain(const LqrCertificate& cert, const DataSet& ds) {
    return gain_from(ds.U0, cert.F, cert.Sigma, "extract_gain");
}

Matrix covariance_map(const DataSet& ds, const Matrix& W, const Matrix& V,
                      const Matrix& G, const Matrix& M, const Matrix& K,
                      const Matrix& X) {
    const Matrix GXGt = G * X * G.transpose();
    const Matrix MKVKM =
        M * K * V * K.transpose() * M.transpose();
    return ds.Y1 * GXGt * ds.Y1.transpose() + GXGt.trace() * (W + V) + W +
           ds.Y1 * MKVKM * ds.Y1.transpose() + MKVKM.trace() * (W + V);
}

FixedPointCheck covariance_fixed_point(const DataSet& ds, const Matrix& W,
                                       const Matrix& V,
                                       const LqrCertificate& cert,
                                       double tol, int max_iter) {
    const int n = ds.n();
    FixedPointCheck out;
    out.monotone = true;
    Matrix X = Matrix::Zero(n, n);
    const double scale = 1.0 + cert.Sigma.cwiseAbs().maxCoeff();
    for (int k = 0; k < max_iter; ++k) {
        const Matrix Xn =
            sym_part(covariance_map(ds, W, V, cert.G, cert.M, cert.K, X));
        if (sym_eig(sym_part(Xn - X)).eigenvalues.minCoeff() < -1e-10 * scale)
            out.monotone = false;
        const double diff = (Xn - X).cwiseAbs().maxCoeff();
        X = Xn;
        out.iterations = k + 1;
        if (diff <= 1e-14 * scale) {
            out.converged = true;
            break;
        }
        if (X.cwiseAbs().maxCoeff() > 1e12 * scale) break;  // diverging
    }
    out.limit = X;
    out.bounded =
        out.converged &&
        sym_eig(sym_part(cert.Sigma - X)).eigenvalues.minCoeff() >= -tol;
    return out;
}

StabilizationVerification verify(const DataSet& ds, const Matrix& W,
                                 const Matrix& V,
                                 const StabilizationCertificate& cert) {
    const int n = ds.n(), N = ds.N();
    StabilizationVerification out;
    out.eq_residual =
        std::max((ds.Y0 * cert.F - cert.Y).cwiseAbs().maxCoeff(),
                 std::abs(cert.Y.trace() - n));
    Matrix lmi = Matrix::Zero(2 * n + N, 2 * n + N);
    const Matrix Y1F = ds.Y1 * cert.F;
    lmi.block(0, 0, n, n) = cert.Y;
    lmi.block(0, n, n, n) = -Y1F.transpose();
    lmi.block(n, 0, n, n) = -Y1F;
    lmi.block(n, n, n, n) = cert.Y;
    lmi.block(0, 2 * n, n, N) = -cert.F.transpose();
    lmi.block(2 * n, 0, N, n) = -cert.F;
    lmi.block(2 * n, 2 * n, N, N) =
        cert.gamma * Matrix::Identity(N, N);
    out.lmi_min_eig = sym_eig(sym_part(lmi)).eigenvalues.minCoeff();
    const Matrix P = require_spd_inverse(W + V, "W + V");
    out.trace_slack =
        (P * cert.Y).trace() - cert.gamma * static_cast<double>(n) * n;
    out.y_min_eig = sym_eig(sym_part(cert.Y)).eigenvalues.minCoeff();
    return out;
}

LqrVerification verify(const DataSet& ds, const Matrix& W, const Matrix& V,
                       const Matrix& Q, const Matrix& R,
                       const LqrCertificate& cert) {
    const int n = ds.n(), m = ds.m();
    LqrVerification out;
    double eq = (ds.Y0 * cert.F - cert.Sigma).cwiseAbs().maxCoeff();
    eq = std::max(
        eq, (ds.U0 * cert.M - Matrix::Identity(m, m)).cwiseAbs().maxCoeff());
    eq = std::max(eq, (ds.Y0 * cert.M).cwiseAbs().maxCoeff());
    eq = std::max(eq, (ds.U0 * (cert.Z - cert.E) * ds.U0.transpose())
                          .cwiseAbs()
                          .maxCoeff());
    out.eq_residual = eq;

    auto min_eig = [](const Matrix& A) {
        return sym_eig(sym_part(A)).eigenvalues.minCoeff();
    };
    const Matrix HZ = cert.H + cert.Z;
    const Matrix cov = cert.Sigma - W - ds.Y1 * HZ * ds.Y1.transpose() -
                       HZ.trace() * (W + V);
    double lmi = min_eig(cov);
    auto stack = [](const Matrix& A, const Matrix& B, const Matrix& C) {
        Matrix out(A.rows() + C.rows(), A.cols() + B.cols());
        out.topLeftCorner(A.rows(), A.cols()) = A;
        out.topRightCorner(B.rows(), B.cols()) = B;
        out.bottomLeftCorner(B.cols(), B.rows()) = B.transpose();
        out.bottomRightCorner(C.rows(), C.cols()) = C;
        return out;
    };
    lmi = std::min(lmi, min_eig(stack(cert.E, cert.F, cert.S)));
    lmi = std::min(lmi, min_eig(stack(cert.H, cert.F, cert.Sigma)));
    lmi = std::min(lmi, min_eig(stack(cert.S, cert.Sigma, V)));
    lmi = std::min(lmi, min_eig(cert.Z));
    out.lmi_min_eig = lmi;

    out.cost_slack = cert.beta - (Q * cert.Sigma).trace() -
                     (R * ds.U0 * cert.H * ds.U0.transpose()).trace() -
                     (R * ds.U0 * cert.E * ds.U0.transpose()).trace();
    out.sigma_min_eig = min_eig(cert.Sigma);
    out.fixed_point = covariance_fixed_point(ds, W, V, cert);
    return out;
}

std::string StabilizationCertificate::to_json() const {
    nlohmann::json j;
    j["type"] = "stabilization";
    j["status"] = sdp::to_string(status);
    j["K"] = detail::matrix_to_json(K);
    j["Y"] = detail::matrix_to_json(Y);
    j["F"] = detail::matrix_to_json(F);
    j["G"] = detail::matrix_to_json(G);
    j["gamma"] = gamma;
    j["residuals"] = residuals_to_json(residuals);
    j["data_seed"] = data_seed;
    return j.dump(2);
}

std::string LqrCertificate::to_json() const {
    nlohmann::json j;
    j["type"] = "lqr";
    j["status"] = sdp::to_string(status);
    j["K"] = detail::matrix_to_json(K);
    j["Sigma"] = detail::matrix_to_json(Sigma);
    j["H"] = detail::matrix_to_json(H);
    j["S"] = detail::matrix_to_json(S);
    j["Z"] = detail::matrix_to_json(Z);
    j["E"] = detail::matrix_to_json(E);
    j["F"] = detail::matrix_to_json(F);
    j["M"] = detail::matrix_to_json(M);
    j["G"] = detail::matrix_to_json(G);
    j["beta"] = beta;
    j["tied_ZE"] = tied_ZE;
    j["residuals"] = residuals_to_json(residuals);
    j["data_seed"] = data_seed;
    return j.dump(2);
}

}  // namespace ddlqr

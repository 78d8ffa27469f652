#include <Eigen/Dense>
#include <cmath>
#include <cstdio>

#include "ddlqr/sdp.hpp"
#include "sdp_standard_form.hpp"

// Primal-dual path-following interior-point solver for the svec-reduced
// standard form, with Nesterov-Todd scaling, a Mehrotra predictor-corrector,
// and the homogeneous self-dual embedding for infeasibility detection.
// Dense throughout: the problems this library builds stay small.

namespace ddlqr::sdp {

namespace detail {

namespace {

// Basis matrix of the k-th svec component of a d x d symmetric matrix,
// returned as an outer-product recipe applied to columns of a factor.
// smat(e_k) is E_ii on the diagonal and (E_ij + E_ji)/sqrt(2) off it.
struct SvecIndex {
    int i, j;  // i >= j
};

std::vector<SvecIndex> svec_indices(int d) {
    std::vector<SvecIndex> idx;
    idx.reserve(svec_len(d));
    for (int j = 0; j < d; ++j) {
        idx.push_back({j, j});
        for (int i = j + 1; i < d; ++i) idx.push_back({i, j});
    }
    return idx;
}

}  // namespace

StandardForm compile(const SdpProblem& p) {
    if (p.vars.empty()) throw Error("sdp::solve: problem has no variables");
    p.check_shapes();

    StandardForm sf;
    sf.var_offsets.resize(p.vars.size());
    int nx = 0;
    for (const auto& v : p.vars) {
        sf.var_offsets[static_cast<std::size_t>(v.id)] = nx;
        nx += v.symmetric ? svec_len(v.rows) : v.rows * v.cols;
    }
    sf.num_vars = nx;

    // Per-component basis matrices, reused by every constraint.
    // For a symmetric variable component k: X = smat(e_k); for a general
    // variable component (i,j) in column-major order: X = E_ij.
    auto for_each_component = [&](VarId vid, auto&& fn) {
        const auto& v = p.var(vid);
        const int off = sf.var_offsets[static_cast<std::size_t>(vid)];
        if (v.symmetric) {
            const double inv_r2 = 1.0 / std::sqrt(2.0);
            int k = 0;
            for (const auto& [i, j] : svec_indices(v.rows)) {
                if (i == j) {
                    fn(off + k, i, j, 1.0, false);
                } else {
                    fn(off + k, i, j, inv_r2, true);  // symmetric pair
                }
                ++k;
            }
        } else {
            int k = 0;
            for (int j = 0; j < v.cols; ++j)
                for (int i = 0; i < v.rows; ++i) fn(off + k++, i, j, 1.0, false);
        }
    };

    // Evaluates the coefficient matrix of one scalar component inside an
    // expression: sum over terms of coeff * L * op(basis) * R, exploiting
    // that the basis is an outer product e_i e_j^T.
    auto component_matrix = [&](const AffineMatrixExpr& e, VarId vid,
                                int i, int j, double w, bool pair) {
        Matrix M = Matrix::Zero(e.rows(), e.cols());
        for (const auto& t : e.terms) {
            if (t.var != vid) continue;
            const int r = t.transposed ? j : i;
            const int c = t.transposed ? i : j;
            M.noalias() += (t.coeff * w) * t.left.col(r) * t.right.row(c);
            if (pair)
                M.noalias() += (t.coeff * w) * t.left.col(c) * t.right.row(r);
        }
        return M;
    };

    // PSD cone rows.
    int cone_rows = 0;
    for (const auto& e : p.psd_constraints) {
        sf.block_offsets.push_back(cone_rows);
        sf.block_dims.push_back(e.rows());
        cone_rows += svec_len(e.rows());
    }
    sf.G = Matrix::Zero(cone_rows, nx);
    sf.h = Vector::Zero(cone_rows);
    for (std::size_t ci = 0; ci < p.psd_constraints.size(); ++ci) {
        const auto& e = p.psd_constraints[ci];
        const int off = sf.block_offsets[ci];
        const int len = svec_len(e.rows());
        sf.h.segment(off, len) = svec(sym_part(e.constant));
        for (const auto& v : p.vars) {
            bool touches = false;
            for (const auto& t : e.terms) touches |= (t.var == v.id);
            if (!touches) continue;
            for_each_component(v.id, [&](int col, int i, int j, double w,
                                         bool pair) {
                const Matrix M = component_matrix(e, v.id, i, j, w, pair);
                // Standard form is G x + s = h with expr = s >= 0, so the
                // coefficient enters with a negative sign.
                sf.G.col(col).segment(off, len) -= svec(sym_part(M));
            });
        }
    }

    // Equality rows: every scalar entry of every equality expression.
    int eq_rows = 0;
    for (const auto& e : p.eq_constraints) eq_rows += e.rows() * e.cols();
    sf.A = Matrix::Zero(eq_rows, nx);
    sf.b = Vector::Zero(eq_rows);
    int roff = 0;
    for (const auto& e : p.eq_constraints) {
        const int len = e.rows() * e.cols();
        sf.b.segment(roff, len) =
            -Eigen::Map<const Vector>(e.constant.data(), len);
        for (const auto& v : p.vars) {
            bool touches = false;
            for (const auto& t : e.terms) touches |= (t.var == v.id);
            if (!touches) continue;
            for_each_component(v.id, [&](int col, int i, int j, double w,
                                         bool pair) {
                const Matrix M = component_matrix(e, v.id, i, j, w, pair);
                sf.A.col(col).segment(roff, len) +=
                    Eigen::Map<const Vector>(M.data(), len);
            });
        }
        roff += len;
    }

    // Objective vector.
    sf.c = Vector::Zero(nx);
    for (const auto& [C, vid] : p.objective.terms) {
        const auto& v = p.var(vid);
        const int off = sf.var_offsets[static_cast<std::size_t>(vid)];
        if (v.symmetric) {
            sf.c.segment(off, svec_len(v.rows)) += svec(sym_part(C));
        } else {
            sf.c.segment(off, v.rows * v.cols) +=
                Eigen::Map<const Vector>(C.data(), v.rows * v.cols);
        }
    }
    return sf;
}

std::map<VarId, Matrix> unpack(const SdpProblem& p, const StandardForm& sf,
                               const Vector& x) {
    std::map<VarId, Matrix> values;
    for (const auto& v : p.vars) {
        const int off = sf.var_offsets[static_cast<std::size_t>(v.id)];
        if (v.symmetric) {
            values[v.id] = smat(x.segment(off, svec_len(v.rows)));
        } else {
            values[v.id] = Eigen::Map<const Matrix>(
                x.segment(off, v.rows * v.cols).data(), v.rows, v.cols);
        }
    }
    return values;
}

}  // namespace detail

namespace {

using detail::StandardForm;

// Extended precision is used only for refinement residuals, where the
// cancellation error otherwise caps the attainable accuracy at
// eps * cond(W)^2 once the barrier parameter is small.
using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

struct ConeBlock {
    int dim = 0;
    int off = 0;  // svec offset into the stacked cone vector
    int len = 0;

    Matrix S, Z;        // current primal/dual slacks
    Matrix Ls, Lz;      // their Cholesky factors
    Matrix R, Rinv;     // NT scaling factor: R' Z R = R^{-1} S R^{-T} = D
    Vector lam;         // scaled point (diagonal entries of D)
    Matrix W, Winv;     // W = R R', the matrix NT scaling
    Matrix W2, Winv2;   // congruence by W / W^{-1} as svec-space matrices
    MatrixL W2l;        // extended-precision copy of W2 for residuals
};

// svec-space matrix of X -> M X M for symmetric M, built column by column
// from outer products.
Matrix congruence_matrix(const Matrix& M) {
    const int d = static_cast<int>(M.rows());
    const int len = svec_len(d);
    Matrix out(len, len);
    const double inv_r2 = 1.0 / std::sqrt(2.0);
    int k = 0;
    for (int j = 0; j < d; ++j) {
        out.col(k++) = svec(M.col(j) * M.col(j).transpose());
        for (int i = j + 1; i < d; ++i) {
            Matrix B = inv_r2 * (M.col(i) * M.col(j).transpose() +
                                 M.col(j) * M.col(i).transpose());
            out.col(k++) = svec(sym_part(B));
        }
    }
    return out;
}

struct Directions {
    Vector dx, dy, dz, ds;
    double dtau = 0.0, dkappa = 0.0;
};

// Ruiz equilibration of the standard form, in place. Columns of the stacked
// [A; G] get one positive factor per x component; equality rows of (A, b)
// are scaled individually; the rows of (G, h) belonging to one PSD block
// share a single factor, which maps the cone onto itself. Badly mixed scales
// are the norm here (covariance programs couple 1e-6 noise floors with 1e+4
// cost weights), and without equilibration the interior-point endgame runs
// out of floating-point accuracy before reaching the tolerances.
// The solution of the original problem is x = d .* x_scaled.
Vector equilibrate(StandardForm& sf) {
    const int n = sf.num_vars;
    const int me = static_cast<int>(sf.b.size());
    const int nb = static_cast<int>(sf.block_dims.size());
    Vector d = Vector::Ones(n);
    for (int pass = 0; pass < 10; ++pass) {
        // Column pass.
        for (int j = 0; j < n; ++j) {
            double m = 0.0;
            if (me > 0) m = sf.A.col(j).cwiseAbs().maxCoeff();
            m = std::max(m, sf.G.col(j).cwiseAbs().maxCoeff());
            if (m <= 0.0 || !std::isfinite(m)) continue;
            const double f = 1.0 / std::sqrt(m);
            if (me > 0) sf.A.col(j) *= f;
            sf.G.col(j) *= f;
            sf.c(j) *= f;
            d(j) *= f;
        }
        // Equality-row pass.
        for (int i = 0; i < me; ++i) {
            const double m = sf.A.row(i).cwiseAbs().maxCoeff();
            if (m <= 0.0 || !std::isfinite(m)) continue;
            const double f = 1.0 / std::sqrt(m);
            sf.A.row(i) *= f;
            sf.b(i) *= f;
        }
        // PSD-block pass (uniform factor per block keeps s in the cone).
        for (int k = 0; k < nb; ++k) {
            const int off = sf.block_offsets[k];
            const int len = svec_len(sf.block_dims[k]);
            const double m =
                sf.G.middleRows(off, len).cwiseAbs().maxCoeff();
            if (m <= 0.0 || !std::isfinite(m)) continue;
            const double f = 1.0 / std::sqrt(m);
            sf.G.middleRows(off, len) *= f;
            sf.h.segment(off, len) *= f;
        }
    }
    // Normalize the objective so tolerances relative to |c| are meaningful.
    const double cmax = sf.c.cwiseAbs().maxCoeff();
    if (cmax > 0.0 && std::isfinite(cmax)) sf.c /= cmax;
    return d;
}

// Largest t with S + t * dS >= 0, given the Cholesky factor of S.
double max_step(const Matrix& L, const Matrix& dS) {
    const Matrix M = L.triangularView<Eigen::Lower>().solve(
        Matrix(L.triangularView<Eigen::Lower>().solve(dS).transpose()));
    const double lmin = sym_eig(sym_part(M)).eigenvalues.minCoeff();
    if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
    return -1.0 / lmin;
}

class HsdSolver {
  public:
    HsdSolver(const StandardForm& sf, const SolveSettings& st,
              const Vector& colscale)
        : sf_(sf), st_(st), colscale_(colscale) {
        const int nblocks = static_cast<int>(sf.block_dims.size());
        blocks_.resize(nblocks);
        nu_ = 0;
        for (int i = 0; i < nblocks; ++i) {
            blocks_[i].dim = sf.block_dims[i];
            blocks_[i].off = sf.block_offsets[i];
            blocks_[i].len = svec_len(sf.block_dims[i]);
            nu_ += sf.block_dims[i];
        }
        x_ = Vector::Zero(sf.num_vars);
        y_ = Vector::Zero(sf.b.size());
        s_ = Vector::Zero(sf.cone_size());
        z_ = Vector::Zero(sf.cone_size());
        for (auto& blk : blocks_) {
            const Vector id = svec(Matrix::Identity(blk.dim, blk.dim));
            s_.segment(blk.off, blk.len) = id;
            z_.segment(blk.off, blk.len) = id;
        }
        tau_ = 1.0;
        kappa_ = 1.0;
        Al_ = sf.A.cast<long double>();
        Gl_ = sf.G.cast<long double>();
    }

    SdpSolution run(const SdpProblem& problem) {
        SdpSolution sol;
        for (int iter = 0; iter <= st_.max_iter; ++iter) {
            if (!iterate_finite()) {
                stall(problem, sol, iter);
                return sol;
            }
            const double mu = (s_.dot(z_) + tau_ * kappa_) / (nu_ + 1);

            // Residuals of the homogeneous model.
            const Vector r1 =
                sf_.A.transpose() * y_ + sf_.G.transpose() * z_ + sf_.c * tau_;
            const Vector r2 = -sf_.A * x_ + sf_.b * tau_;
            const Vector r3 = -sf_.G * x_ + sf_.h * tau_ - s_;
            const double r4 = -sf_.c.dot(x_) - sf_.b.dot(y_) - sf_.h.dot(z_) -
                              kappa_;

            // Scaled convergence metrics.
            const double pcost = sf_.c.dot(x_) / tau_;
            const double dcost = -(sf_.b.dot(y_) + sf_.h.dot(z_)) / tau_;
            const double gap = s_.dot(z_) / (tau_ * tau_);
            const double relgap = gap / std::max(1.0, std::abs(pcost));
            const double pres = std::max(
                (sf_.A * x_ / tau_ - sf_.b).norm() / (1.0 + sf_.b.norm()),
                (sf_.G * x_ / tau_ + s_ / tau_ - sf_.h).norm() /
                    (1.0 + sf_.h.norm()));
            const double dres =
                (sf_.A.transpose() * y_ + sf_.G.transpose() * z_ + sf_.c * tau_)
                    .norm() /
                (tau_ * (1.0 + sf_.c.norm()));

            IterationInfo info;
            info.iter = iter;
            info.primal_obj = pcost;
            info.dual_obj = dcost;
            info.gap = gap;
            info.primal_res = pres;
            info.dual_res = dres;
            info.mu = mu;
            info.tau = tau_;
            info.kappa = kappa_;
            info.embed_res = r4;
            sol.trace.push_back(info);
            if (st_.verbose)
                std::printf(
                    "it %3d  pobj %+.6e dobj %+.6e gap %.2e pres %.2e "
                    "dres %.2e mu %.2e tau %.2e kappa %.2e cent %.1e\n",
                    iter, pcost, dcost, gap, pres, dres, mu, tau_, kappa_,
                    min_comp_eig(s_, z_, tau_, kappa_) / mu);

            // Remember the most accurate iterate seen so far; the endgame of
            // the interior-point method can destroy an almost-converged point
            // once the scaling matrices become too ill conditioned.
            const double merit =
                std::max({pres, dres, std::min(gap, relgap)});
            if (!best_valid_ || merit < best_merit_) {
                best_valid_ = true;
                best_merit_ = merit;
                best_pres_ = pres;
                best_dres_ = dres;
                best_gap_ = gap;
                best_relgap_ = relgap;
                best_x_ = x_;
                best_y_ = y_;
                best_z_ = z_;
                best_s_ = s_;
                best_tau_ = tau_;
                best_kappa_ = kappa_;
            }

            if (pres <= st_.feas_tol && dres <= st_.feas_tol &&
                (relgap <= st_.gap_tol || gap <= st_.gap_tol)) {
                sol.status = SdpStatus::Optimal;
                finalize(problem, sol, iter);
                return sol;
            }

            // Infeasibility certificates (tau/kappa test of the embedding).
            if (kappa_ > tau_ * 1e3 || mu <= 1e-14) {
                const double by_hz = sf_.b.dot(y_) + sf_.h.dot(z_);
                if (by_hz < 0.0) {
                    const double pinfres =
                        (sf_.A.transpose() * y_ + sf_.G.transpose() * z_)
                            .norm() /
                        (-by_hz);
                    if (pinfres <= st_.feas_tol * 1e2) {
                        sol.status = SdpStatus::PrimalInfeasible;
                        finalize(problem, sol, iter);
                        return sol;
                    }
                }
                const double cx = sf_.c.dot(x_);
                if (cx < 0.0) {
                    const double dinfres =
                        std::max((sf_.A * x_).norm(),
                                 (sf_.G * x_ + s_).norm()) /
                        (-cx);
                    if (dinfres <= st_.feas_tol * 1e2) {
                        sol.status = SdpStatus::DualInfeasible;
                        finalize(problem, sol, iter);
                        return sol;
                    }
                }
            }

            if (iter == st_.max_iter) break;

            if (!update_scalings()) {
                stall(problem, sol, iter);
                return sol;
            }

            // Direction computation with escalating regularization. Near the
            // optimum of a weakly conditioned program the reduced KKT matrix
            // can become too ill conditioned for the LU factorization to act
            // even as a preconditioner, in which case the assembled direction
            // fails the backtracking test below for every step length. A
            // heavier static shift makes the factorization reliable again,
            // and the iterative refinement in solve3 (which targets the
            // unregularized system) removes the bias it introduces.
            const double r1n = r1.norm(), r2n = r2.norm(), r3n = r3.norm();
            const double r4n = std::abs(r4);
            // Centrality of the current iterate: the smallest eigenvalue of
            // the scaled complementarity products, including the tau*kappa
            // pair. Steps may not drive any single product to zero while the
            // average mu is still large — once a pair detaches from the
            // central path, every later direction is boundary-limited there
            // and the iteration grinds to a halt.
            double cent_now = tau_ * kappa_;
            for (const auto& blk : blocks_) {
                const double lmin = blk.lam.minCoeff();
                cent_now = std::min(cent_now, lmin * lmin);
            }
            bool accepted = false;
            double accepted_alpha = 0.0;
            double reg = st_.static_reg;
            for (int attempt = 0; attempt < 4 && !accepted;
                 ++attempt, reg *= 1e3) {
                factor_kkt(reg);

                // Direction used by every right-hand side involving dtau.
                Directions v1;
                if (!solve3(-sf_.c, sf_.b, sf_.h, v1)) continue;

                // Predictor (affine scaling) direction: sigma = 0, rs = -s.
                Directions aff;
                if (!assemble_direction(v1, r1, r2, r3, r4, -s_,
                                        -tau_ * kappa_, 0.0, mu, aff))
                    continue;
                const double alpha_aff = std::min(1.0, step_length(aff));
                double sigma = std::pow(1.0 - alpha_aff, 3);
                sigma = std::min(std::max(sigma, 1e-8), 0.999);

                // Corrector right-hand side from the affine direction.
                Vector rs(sf_.cone_size());
                for (auto& blk : blocks_) {
                    const Matrix dS = smat(aff.ds.segment(blk.off, blk.len));
                    const Matrix dZ = smat(aff.dz.segment(blk.off, blk.len));
                    const Matrix dSb = blk.Rinv * dS * blk.Rinv.transpose();
                    const Matrix dZb = blk.R.transpose() * dZ * blk.R;
                    const Matrix corr = 0.5 * (dSb * dZb + dZb * dSb);
                    Matrix rmat(blk.dim, blk.dim);
                    for (int i = 0; i < blk.dim; ++i)
                        for (int j = 0; j < blk.dim; ++j) {
                            double num = -2.0 * corr(i, j);
                            if (i == j)
                                num += 2.0 *
                                       (sigma * mu - blk.lam[i] * blk.lam[i]);
                            rmat(i, j) = num / (blk.lam[i] + blk.lam[j]);
                        }
                    rs.segment(blk.off, blk.len) =
                        svec(sym_part(blk.R * rmat * blk.R.transpose()));
                }
                const double rkt =
                    sigma * mu - tau_ * kappa_ - aff.dtau * aff.dkappa;

                Directions dir;
                if (!assemble_direction(v1, r1, r2, r3, r4, rs, rkt, sigma,
                                        mu, dir))
                    continue;
                double alpha = std::min(1.0, 0.99 * step_length(dir));
                // A single step may consume at most half of tau. The raw
                // residuals all shrink along a recession ray of the embedding
                // (everything scales toward zero while the de-homogenized
                // iterate degrades), so the backtracking test below cannot
                // reject such a step; rationing tau keeps one inaccurate
                // direction from flinging the iterate onto the ray, while a
                // genuine infeasibility certificate still emerges after a
                // modest number of halvings.
                if (dir.dtau < 0.0)
                    alpha = std::min(alpha, -0.5 * tau_ / dir.dtau);
                if (st_.verbose && alpha < 0.05) {
                    std::printf("    blk steps:");
                    for (const auto& blk : blocks_) {
                        const double as = max_step(
                            blk.Ls, smat(dir.ds.segment(blk.off, blk.len)));
                        const double az = max_step(
                            blk.Lz, smat(dir.dz.segment(blk.off, blk.len)));
                        std::printf(" d%d(s %.1e z %.1e)", blk.dim,
                                    std::min(as, 1.0), std::min(az, 1.0));
                    }
                    std::printf(" tau %.1e kap %.1e\n",
                                dir.dtau < 0 ? -tau_ / dir.dtau : 1.0,
                                dir.dkappa < 0 ? -kappa_ / dir.dkappa : 1.0);
                }

                // Backtracking safeguard. With exact directions a step of
                // length alpha contracts both the complementarity and the
                // embedding residuals by 1 - alpha(1 - sigma); an inaccurate
                // direction does not, and taking the step anyway destroys an
                // almost-converged iterate. Accept only steps that make the
                // expected progress (with generous slack), else halve alpha.
                for (int bt = 0; bt < 30 && alpha > 1e-6;
                     ++bt, alpha *= 0.5) {
                    const Vector xt = x_ + alpha * dir.dx;
                    const Vector yt = y_ + alpha * dir.dy;
                    const Vector zt = z_ + alpha * dir.dz;
                    const Vector st = s_ + alpha * dir.ds;
                    const double taut = tau_ + alpha * dir.dtau;
                    const double kappat = kappa_ + alpha * dir.dkappa;
                    const double mut =
                        (st.dot(zt) + taut * kappat) / (nu_ + 1);
                    const double contraction = 1.0 - alpha * (1.0 - sigma);
                    const Vector r1t = sf_.A.transpose() * yt +
                                       sf_.G.transpose() * zt + sf_.c * taut;
                    const Vector r2t = -sf_.A * xt + sf_.b * taut;
                    const Vector r3t = -sf_.G * xt + sf_.h * taut - st;
                    const double r4t = -sf_.c.dot(xt) - sf_.b.dot(yt) -
                                       sf_.h.dot(zt) - kappat;
                    // Demand at least half of the residual contraction an
                    // exact step would deliver, on every residual component
                    // separately (an aggregate test lets one component grow
                    // under cover of a larger one, and any growth allowance
                    // compounds across iterations), plus a small floor for
                    // roundoff in the residual evaluation.
                    // On centering-dominated steps the exact contraction is
                    // below the direction's accuracy floor, so only bar
                    // significant growth there.
                    const double need =
                        sigma >= 0.9 ? 1.0 + 0.1 * alpha
                                     : 1.0 - 0.5 * alpha * (1.0 - sigma);
                    // A component already below the feasibility tolerance (in
                    // the normalized units of the convergence test) is exempt
                    // from contracting: it cannot block convergence, and the
                    // direction's accuracy floor routinely exceeds the
                    // demanded decrement down there.
                    auto contracts = [&](double trial, double base,
                                         double scale) {
                        return trial <= need * base + 1e-11 * (1.0 + base) ||
                               trial <= st_.feas_tol * taut * scale;
                    };
                    const double c_sc = 1.0 + sf_.c.norm();
                    const double b_sc = 1.0 + sf_.b.norm();
                    const double h_sc = 1.0 + sf_.h.norm();
                    // Centering-dominated steps (sigma near 1) keep mu
                    // roughly constant by design, and the second-order term
                    // can push it slightly up; demanding a decrease there
                    // deadlocks. Cap the growth instead, and require genuine
                    // decrease only when the step actually aims at progress.
                    // Judge mu in the units the iterate will have after the
                    // tau+kappa renormalization below: a step that shrinks
                    // tau+kappa gets its complementarity inflated by the
                    // rescaling, and measuring pre-renormalization lets that
                    // inflation compound across iterations unchecked. Growth
                    // beyond the usual allowance is still accepted when every
                    // embedding residual genuinely contracts — the recovery
                    // leg out of a tau dive trades a large mu re-inflation
                    // for a dramatic residual drop, and blocking it deadlocks
                    // the solver — but an inflating step with stagnant
                    // residuals is the signature of drifting onto a recession
                    // ray of the embedding, and is rejected.
                    const double mut_eff =
                        mut * std::pow(2.0 / (taut + kappat), 2);
                    const bool mu_fine =
                        mut_eff <= 1.01 * mu &&
                        (sigma >= 0.9 ||
                         mut_eff <= (1.0 - 0.01 * alpha * (1.0 - sigma)) * mu);
                    auto contracts_strict = [&](double trial, double base,
                                                double scale) {
                        return trial <=
                                   (1.0 - 0.5 * alpha * (1.0 - sigma)) *
                                           base +
                                       1e-11 * (1.0 + base) ||
                               trial <= st_.feas_tol * taut * scale;
                    };
                    const bool mu_ok =
                        mu_fine ||
                        (contracts_strict(r1t.norm(), r1n, c_sc) &&
                         contracts_strict(r2t.norm(), r2n, b_sc) &&
                         contracts_strict(r3t.norm(), r3n, h_sc) &&
                         contracts_strict(std::abs(r4t), r4n,
                                          c_sc + b_sc + h_sc));
                    // A centering step (sigma near 1) aims at the central
                    // path at the current mu and has no business draining
                    // the tau/kappa pair: a direction that does is escaping
                    // along a recession ray (the renormalization would then
                    // silently inflate the whole iterate), which the residual
                    // tests cannot see because raw residuals shrink with tau.
                    const bool tk_ok =
                        sigma < 0.9 ||
                        taut + kappat >= 0.95 * (tau_ + kappa_);
                    constexpr double kGammaCent = 1e-3;
                    const double cent_t =
                        min_comp_eig(st, zt, taut, kappat);
                    const bool cent_ok =
                        cent_t >= kGammaCent * mut ||
                        (cent_now > 0.0 &&
                         cent_t >= 0.95 * cent_now * (mut / mu));
                    if (cent_ok && mu_ok &&
                        contracts(r1t.norm(), r1n, c_sc) &&
                        contracts(r2t.norm(), r2n, b_sc) &&
                        contracts(r3t.norm(), r3n, h_sc) &&
                        contracts(std::abs(r4t), r4n,
                                  c_sc + b_sc + h_sc)) {
                        x_ = xt;
                        y_ = yt;
                        z_ = zt;
                        s_ = st;
                        tau_ = taut;
                        kappa_ = kappat;
                        accepted = true;
                        accepted_alpha = alpha;
                        break;
                    }
                    if (st_.verbose && bt == 0)
                        std::printf(
                            "    bt0 a=%.2e sig %.3f muok %d "
                            "c1 %d (%.6e/%.6e) c2 %d (%.6e/%.6e) "
                            "c3 %d (%.6e/%.6e) c4 %d (%.6e/%.6e)\n",
                            alpha, sigma, static_cast<int>(mu_ok),
                            static_cast<int>(
                                contracts(r1t.norm(), r1n, c_sc)),
                            r1t.norm(), need * r1n,
                            static_cast<int>(
                                contracts(r2t.norm(), r2n, b_sc)),
                            r2t.norm(), need * r2n,
                            static_cast<int>(
                                contracts(r3t.norm(), r3n, h_sc)),
                            r3t.norm(), need * r3n,
                            static_cast<int>(contracts(std::abs(r4t), r4n,
                                                       c_sc + b_sc + h_sc)),
                            std::abs(r4t), need * r4n);
                }
                if (st_.verbose && !accepted)
                    std::printf(
                        "    it %3d: no acceptable step at reg %.1e, "
                        "retrying\n",
                        iter, reg);
            }
            sol.trace.back().step = accepted_alpha;
            if (!accepted) {
                stall(problem, sol, iter);
                return sol;
            }

            // The homogeneous model is invariant under a positive rescaling
            // of the whole iterate, but floating point is not: if tau drifts
            // small the attainable complementarity floor (around 1e-14)
            // translates into a duality-gap floor of mu/tau^2 in the
            // recovered solution. Renormalize so tau + kappa stays at its
            // initial value of 2.
            const double scale = 2.0 / (tau_ + kappa_);
            if (std::isfinite(scale) && scale > 0.0) {
                x_ *= scale;
                y_ *= scale;
                z_ *= scale;
                s_ *= scale;
                tau_ *= scale;
                kappa_ *= scale;
            }
        }
        stall(problem, sol, st_.max_iter, /*hit_iteration_cap=*/true);
        return sol;
    }

  private:
    bool iterate_finite() const {
        return x_.allFinite() && y_.allFinite() && s_.allFinite() &&
               z_.allFinite() && std::isfinite(tau_) && std::isfinite(kappa_) &&
               tau_ > 0.0 && kappa_ > 0.0;
    }

    bool update_scalings() {
        for (auto& blk : blocks_) {
            blk.S = smat(s_.segment(blk.off, blk.len));
            blk.Z = smat(z_.segment(blk.off, blk.len));
            Eigen::LLT<Matrix> llt_s(blk.S), llt_z(blk.Z);
            if (llt_s.info() != Eigen::Success ||
                llt_z.info() != Eigen::Success)
                return false;
            blk.Ls = llt_s.matrixL();
            blk.Lz = llt_z.matrixL();
            Eigen::JacobiSVD<Matrix> svd(
                blk.Ls.transpose() * blk.Lz,
                Eigen::ComputeFullU | Eigen::ComputeFullV);
            blk.lam = svd.singularValues();
            if (blk.lam.minCoeff() <= 0.0) return false;
            const Vector dinv_sqrt = blk.lam.cwiseSqrt().cwiseInverse();
            blk.R = blk.Ls * svd.matrixU() * dinv_sqrt.asDiagonal();
            // R^{-1} = D^{1/2} U' Ls^{-1}
            blk.Rinv = blk.lam.cwiseSqrt().asDiagonal() *
                       svd.matrixU().transpose() *
                       blk.Ls.triangularView<Eigen::Lower>()
                           .solve(Matrix::Identity(blk.dim, blk.dim));
            blk.W = blk.R * blk.R.transpose();
            blk.Winv = blk.Rinv.transpose() * blk.Rinv;
            blk.W2 = congruence_matrix(blk.W);
            blk.Winv2 = congruence_matrix(blk.Winv);
            blk.W2l = blk.W2.cast<long double>();
        }
        return true;
    }

    Vector apply_winv2(const Vector& u) const {
        Vector out(u.size());
        for (const auto& blk : blocks_)
            out.segment(blk.off, blk.len) =
                blk.Winv2 * u.segment(blk.off, blk.len);
        return out;
    }

    Vector apply_w2(const Vector& u) const {
        Vector out(u.size());
        for (const auto& blk : blocks_)
            out.segment(blk.off, blk.len) =
                blk.W2 * u.segment(blk.off, blk.len);
        return out;
    }

    void factor_kkt(double reg) {
        const int nx = sf_.num_vars;
        const int np = static_cast<int>(sf_.b.size());
        Gw_.resize(sf_.cone_size(), nx);
        for (const auto& blk : blocks_)
            Gw_.middleRows(blk.off, blk.len) =
                blk.Winv2 * sf_.G.middleRows(blk.off, blk.len);
        mtop_.noalias() = sf_.G.transpose() * Gw_;
        Matrix K(nx + np, nx + np);
        K.topLeftCorner(nx, nx) = mtop_ + reg * Matrix::Identity(nx, nx);
        K.topRightCorner(nx, np) = sf_.A.transpose();
        K.bottomLeftCorner(np, nx) = sf_.A;
        K.bottomRightCorner(np, np) = -reg * Matrix::Identity(np, np);
        lu_.compute(K);
    }

    // One elimination pass for the symmetric 3x3 system
    //   [ 0   A'  G' ] [dx]   [bx]
    //   [ A   0   0  ] [dy] = [by]
    //   [ G   0  -W2 ] [dz]   [bz]
    // using the factored (regularized) reduced matrix.
    void solve3_once(const Vector& bx, const Vector& by, const Vector& bz,
                     Vector& dx, Vector& dy, Vector& dz) const {
        const int nx = sf_.num_vars;
        const int np = static_cast<int>(sf_.b.size());
        Vector rhs(nx + np);
        rhs.head(nx) = bx + sf_.G.transpose() * apply_winv2(bz);
        rhs.tail(np) = by;
        const Vector sol = lu_.solve(rhs);
        dx = sol.head(nx);
        dy = sol.tail(np);
        dz = apply_winv2(sf_.G * dx - bz);
    }

    // Full solve with iterative refinement against the complete 3x3 system.
    // Refining only the reduced system is not enough: the back substitution
    // for dz loses accuracy like cond(W) once the barrier parameter is
    // small, and that error lands squarely in the primal residual.  The
    // residuals are accumulated in extended precision because they are pure
    // cancellation; the correction solves stay in double.
    bool solve3(const Vector& bx, const Vector& by, const Vector& bz,
                Directions& out) {
        solve3_once(bx, by, bz, out.dx, out.dy, out.dz);
        const VectorL bxl = bx.cast<long double>();
        const VectorL byl = by.cast<long double>();
        const VectorL bzl = bz.cast<long double>();
        double prev_norm = std::numeric_limits<double>::infinity();
        Vector bestx = out.dx, besty = out.dy, bestz = out.dz;
        for (int pass = 0; pass < 5; ++pass) {
            const VectorL dxl = out.dx.cast<long double>();
            const VectorL dyl = out.dy.cast<long double>();
            const VectorL dzl = out.dz.cast<long double>();
            VectorL exl = bxl - Al_.transpose() * dyl - Gl_.transpose() * dzl;
            VectorL eyl = byl - Al_ * dxl;
            VectorL ezl = bzl - Gl_ * dxl;
            for (const auto& blk : blocks_)
                ezl.segment(blk.off, blk.len) +=
                    blk.W2l * dzl.segment(blk.off, blk.len);
            const Vector ex = exl.cast<double>();
            const Vector ey = eyl.cast<double>();
            const Vector ez = ezl.cast<double>();
            const double rnorm = std::max(
                {ex.lpNorm<Eigen::Infinity>(), ey.size() ? ey.lpNorm<Eigen::Infinity>() : 0.0,
                 ez.lpNorm<Eigen::Infinity>()});
            if (rnorm >= prev_norm) break;  // refinement has stopped helping
            prev_norm = rnorm;
            bestx = out.dx;
            besty = out.dy;
            bestz = out.dz;
            const double bnorm = std::max(
                {bx.lpNorm<Eigen::Infinity>(), by.size() ? by.lpNorm<Eigen::Infinity>() : 0.0,
                 bz.lpNorm<Eigen::Infinity>()});
            if (rnorm <= 1e-16 * (1.0 + bnorm)) break;
            Vector cx, cy, cz;
            solve3_once(ex, ey, ez, cx, cy, cz);
            out.dx += cx;
            out.dy += cy;
            out.dz += cz;
        }
        out.dx = bestx;
        out.dy = besty;
        out.dz = bestz;
        return out.dx.allFinite() && out.dy.allFinite() &&
               out.dz.allFinite();
    }

    // Builds a full direction for given complementarity targets (rs, rkt)
    // and residual damping (1 - sigma), reusing the precomputed v1.
    bool assemble_direction(const Directions& v1, const Vector& r1,
                            const Vector& r2, const Vector& r3, double r4,
                            const Vector& rs, double rkt, double sigma,
                            double /*mu*/, Directions& out) {
        const double damp = 1.0 - sigma;
        Directions v0;
        if (!solve3(-damp * r1, damp * r2, damp * r3 - rs, v0)) return false;

        const double q0 = sf_.c.dot(v0.dx) + sf_.b.dot(v0.dy) +
                          sf_.h.dot(v0.dz);
        const double q1 = sf_.c.dot(v1.dx) + sf_.b.dot(v1.dy) +
                          sf_.h.dot(v1.dz);
        const double denom = q1 - kappa_ / tau_;
        if (std::abs(denom) < 1e-300) return false;
        const double dtau = (damp * r4 - q0 - rkt / tau_) / denom;

        out.dx = v0.dx + dtau * v1.dx;
        out.dy = v0.dy + dtau * v1.dy;
        out.dz = v0.dz + dtau * v1.dz;
        out.dtau = dtau;
        // Recover ds from the cone equation rather than as rs - W^2 dz: the
        // two agree up to the KKT solve residual, but the W^2 form amplifies
        // that residual by the conditioning of the scaling matrix and the
        // error lands in primal feasibility, where it accumulates across
        // iterations. This form keeps the cone equation exact and leaves the
        // discrepancy in the complementarity target, which is re-aimed at
        // every iteration.
        out.ds = damp * r3 - sf_.G * out.dx + sf_.h * dtau;
        out.dkappa = (rkt - kappa_ * dtau) / tau_;
        return out.dx.allFinite() && out.ds.allFinite() &&
               std::isfinite(out.dtau) && std::isfinite(out.dkappa);
    }

    // Smallest scaled complementarity eigenvalue of a trial point, i.e.
    // min over blocks of lambda_min(L' Z L) with S = L L', plus tau*kappa.
    // Returns -1 when the trial primal slack is not positive definite.
    double min_comp_eig(const Vector& s, const Vector& z, double tau,
                        double kappa) const {
        double m = tau * kappa;
        for (const auto& blk : blocks_) {
            const Matrix St = smat(s.segment(blk.off, blk.len));
            const Matrix Zt = smat(z.segment(blk.off, blk.len));
            Eigen::LLT<Matrix> llt(St);
            if (llt.info() != Eigen::Success) return -1.0;
            const Matrix L = llt.matrixL();
            const Eigen::SelfAdjointEigenSolver<Matrix> es(
                sym_part(L.transpose() * Zt * L));
            m = std::min(m, es.eigenvalues().minCoeff());
        }
        return m;
    }

    double step_length(const Directions& d) const {
        double alpha = std::numeric_limits<double>::infinity();
        for (const auto& blk : blocks_) {
            alpha = std::min(
                alpha, max_step(blk.Ls, smat(d.ds.segment(blk.off, blk.len))));
            alpha = std::min(
                alpha, max_step(blk.Lz, smat(d.dz.segment(blk.off, blk.len))));
        }
        if (d.dtau < 0.0) alpha = std::min(alpha, -tau_ / d.dtau);
        if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa_ / d.dkappa);
        return alpha;
    }

    // Called when progress stops: restores the most accurate iterate and
    // accepts it at a modest multiple of the requested tolerances, which is
    // where ill conditioning of the scaling caps attainable accuracy.
    void stall(const SdpProblem& problem, SdpSolution& sol, int iters,
               bool hit_iteration_cap = false) {
        constexpr double kRelax = 100.0;
        if (best_valid_) {
            x_ = best_x_;
            y_ = best_y_;
            z_ = best_z_;
            s_ = best_s_;
            tau_ = best_tau_;
            kappa_ = best_kappa_;
        }
        if (best_valid_ && best_pres_ <= kRelax * st_.feas_tol &&
            best_dres_ <= kRelax * st_.feas_tol &&
            (best_relgap_ <= kRelax * st_.gap_tol ||
             best_gap_ <= kRelax * st_.gap_tol)) {
            sol.status = SdpStatus::Optimal;
        } else {
            sol.status = hit_iteration_cap ? SdpStatus::MaxIterations
                                           : SdpStatus::NumericalFailure;
        }
        finalize(problem, sol, iters);
    }

    void finalize(const SdpProblem& problem, SdpSolution& sol, int iters) {
        sol.iterations = iters;
        const double tau = (tau_ > 0.0 && sol.status != SdpStatus::DualInfeasible &&
                            sol.status != SdpStatus::PrimalInfeasible)
                               ? tau_
                               : 1.0;
        sol.values = detail::unpack(
            problem, sf_, Vector(colscale_.cwiseProduct(x_) / tau));
        sol.objective = problem.evaluate_objective(sol.values);
        sol.primal_residual = std::max(
            (sf_.A * x_ / tau - sf_.b).norm() / (1.0 + sf_.b.norm()),
            (sf_.G * x_ / tau + s_ / tau - sf_.h).norm() /
                (1.0 + sf_.h.norm()));
        sol.dual_residual =
            (sf_.A.transpose() * y_ + sf_.G.transpose() * z_ + sf_.c * tau_)
                .norm() /
            (tau_ * (1.0 + sf_.c.norm()));
        const double pcost = sf_.c.dot(x_) / tau_;
        sol.rel_gap = (s_.dot(z_) / (tau_ * tau_)) /
                      std::max(1.0, std::abs(pcost));
        sol.psd_min_eigs.clear();
        for (const auto& e : problem.psd_constraints) {
            const Matrix m = problem.evaluate(e, sol.values);
            sol.psd_min_eigs.push_back(
                sym_eig(sym_part(m)).eigenvalues.minCoeff());
        }
    }

    const StandardForm& sf_;
    const SolveSettings& st_;
    Vector colscale_;
    std::vector<ConeBlock> blocks_;
    int nu_ = 0;

    Vector x_, y_, s_, z_;
    double tau_ = 1.0, kappa_ = 1.0;

    // Most accurate iterate seen so far, kept as a fallback.
    bool best_valid_ = false;
    double best_merit_ = 0.0, best_pres_ = 0.0, best_dres_ = 0.0;
    double best_gap_ = 0.0, best_relgap_ = 0.0;
    Vector best_x_, best_y_, best_z_, best_s_;
    double best_tau_ = 1.0, best_kappa_ = 1.0;

    Matrix Gw_, mtop_;
    MatrixL Al_, Gl_;
    Eigen::PartialPivLU<Matrix> lu_;
};

}  // namespace

SdpSolution solve(const SdpProblem& p, const SolveSettings& settings) {
    detail::StandardForm sf = detail::compile(p);
    const Vector colscale = equilibrate(sf);
    HsdSolver solver(sf, settings, colscale);
    return solver.run(p);
}

}  // namespace ddlqr::sdp

#pragma once

#include <map>
#include <string>
#include <vector>

#include "ddlqr/linalg.hpp"

namespace ddlqr::sdp {

using VarId = int;

struct MatrixVar {
    VarId id = -1;
    int rows = 0;
    int cols = 0;
    bool symmetric = false;
};

// One affine term: coeff * L * op(X_var) * R, op being identity or transpose.
struct Term {
    Matrix left;
    VarId var = -1;
    Matrix right;
    bool transposed = false;
    double coeff = 1.0;
};

// constant + sum of terms, all conforming to one result shape.
struct AffineMatrixExpr {
    Matrix constant;
    std::vector<Term> terms;

    int rows() const { return static_cast<int>(constant.rows()); }
    int cols() const { return static_cast<int>(constant.cols()); }

    static AffineMatrixExpr zero(int r, int c) {
        return {Matrix::Zero(r, c), {}};
    }
    static AffineMatrixExpr constant_expr(const Matrix& C) { return {C, {}}; }

    AffineMatrixExpr& add_term(const Matrix& L, VarId v, const Matrix& R,
                               bool transposed = false, double coeff = 1.0);
    // coeff * X (or X^T) with identity paddings of the right sizes.
    AffineMatrixExpr& add_var(VarId v, int var_rows, int var_cols,
                              bool transposed = false, double coeff = 1.0);
    AffineMatrixExpr& add_constant(const Matrix& C);
    // C * x for a 1x1 (scalar) variable, expanded into rank-one terms.
    AffineMatrixExpr& add_scalar_term(const Matrix& C, VarId scalar_var);

    AffineMatrixExpr transpose() const;
    AffineMatrixExpr negate() const;
};

// Assembles a block matrix expression from a grid of sub-expressions.
AffineMatrixExpr block_expr(
    const std::vector<std::vector<AffineMatrixExpr>>& grid);

// Linear trace-form objective: sum_i <C_i, X_i> + constant, minimized.
struct LinearObjective {
    std::vector<std::pair<Matrix, VarId>> terms;
    double constant = 0.0;
};

enum class SdpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
};

std::string to_string(SdpStatus s);

struct SolveSettings {
    double feas_tol = 1e-8;
    double gap_tol = 1e-8;
    double psd_tol = 1e-7;
    int max_iter = 200;
    double static_reg = 1e-8;
    bool verbose = false;
};

struct IterationInfo {
    int iter = 0;
    double primal_obj = 0.0;
    double dual_obj = 0.0;
    double gap = 0.0;
    double primal_res = 0.0;
    double dual_res = 0.0;
    double mu = 0.0;
    double step = 0.0;
    double tau = 0.0;
    double kappa = 0.0;
    // Residual of the last row of the homogeneous embedding,
    // r4 = -c'x - b'y - h'z - kappa.  Exactly: dual - primal = (r4 + kappa)/tau,
    // so weak duality holds whenever this residual has been driven to zero.
    double embed_res = 0.0;
};

struct SdpSolution {
    SdpStatus status = SdpStatus::NumericalFailure;
    std::map<VarId, Matrix> values;
    double objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double rel_gap = 0.0;
    std::vector<double> psd_min_eigs;  // per PSD constraint, at the solution
    int iterations = 0;
    std::vector<IterationInfo> trace;
};

struct SdpProblem {
    std::vector<MatrixVar> vars;
    std::vector<AffineMatrixExpr> psd_constraints;  // each required >= 0
    std::vector<AffineMatrixExpr> eq_constraints;   // each required == 0
    LinearObjective objective;

    VarId declare_var(int rows, int cols, bool symmetric = false);
    const MatrixVar& var(VarId id) const;

    void constrain_psd(const AffineMatrixExpr& expr);
    void constrain_eq(const AffineMatrixExpr& expr);
    void add_objective(const Matrix& C, VarId v);

    // Evaluates an expression at given variable values.
    Matrix evaluate(const AffineMatrixExpr& expr,
                    const std::map<VarId, Matrix>& values) const;
    double evaluate_objective(const std::map<VarId, Matrix>& values) const;

    void check_shapes() const;  // throws ShapeMismatch on any inconsistency
};

SdpSolution solve(const SdpProblem& p, const SolveSettings& settings = {});

struct ResidualReport {
    std::vector<double> eq_residuals;   // max abs entry per equality
    std::vector<double> psd_min_eigs;   // per PSD constraint
    double objective = 0.0;
    double max_eq_residual = 0.0;
    double min_psd_eig = 0.0;

    bool within(double feas_tol, double psd_tol) const {
        return max_eq_residual <= feas_tol && min_psd_eig >= -psd_tol;
    }
};

// Recomputes every constraint residual from the values alone, independently
// of the solver's internal bookkeeping.
ResidualReport check_solution(const SdpProblem& p, const SdpSolution& sol);

// Plain-text dump (one block per constraint, row-major coefficients) for
// cross-checking against external solvers.
std::string dump(const SdpProblem& p);

}  // namespace ddlqr::sdp

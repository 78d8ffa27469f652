#include "ddlqr/sdp.hpp"

#include <sstream>

#include "sdp_standard_form.hpp"

namespace ddlqr::sdp {

AffineMatrixExpr& AffineMatrixExpr::add_term(const Matrix& L, VarId v,
                                             const Matrix& R, bool transposed,
                                             double coeff) {
    terms.push_back({L, v, R, transposed, coeff});
    return *this;
}

AffineMatrixExpr& AffineMatrixExpr::add_var(VarId v, int var_rows,
                                            int var_cols, bool transposed,
                                            double coeff) {
    const int r = transposed ? var_cols : var_rows;
    const int c = transposed ? var_rows : var_cols;
    return add_term(Matrix::Identity(rows(), r), v,
                    Matrix::Identity(c, cols()), transposed, coeff);
}

AffineMatrixExpr& AffineMatrixExpr::add_constant(const Matrix& C) {
    constant += C;
    return *this;
}

AffineMatrixExpr& AffineMatrixExpr::add_scalar_term(const Matrix& C,
                                                    VarId scalar_var) {
    // C * x = sum_j (C e_j) x e_j^T for a 1x1 variable x.
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
        Matrix R = Matrix::Zero(1, C.cols());
        R(0, j) = 1.0;
        terms.push_back({C.col(j), scalar_var, R, false, 1.0});
    }
    return *this;
}

AffineMatrixExpr AffineMatrixExpr::transpose() const {
    AffineMatrixExpr out;
    out.constant = constant.transpose();
    for (const auto& t : terms)
        out.terms.push_back({t.right.transpose(), t.var, t.left.transpose(),
                             !t.transposed, t.coeff});
    return out;
}

AffineMatrixExpr AffineMatrixExpr::negate() const {
    AffineMatrixExpr out = *this;
    out.constant = -out.constant;
    for (auto& t : out.terms) t.coeff = -t.coeff;
    return out;
}

AffineMatrixExpr block_expr(
    const std::vector<std::vector<AffineMatrixExpr>>& grid) {
    if (grid.empty() || grid[0].empty())
        throw ShapeMismatch("block_expr: empty grid");
    const std::size_t ncols = grid[0].size();
    std::vector<int> row_heights(grid.size());
    std::vector<int> col_widths(ncols);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i].size() != ncols)
            throw ShapeMismatch("block_expr: ragged grid");
        row_heights[i] = grid[i][0].rows();
        for (std::size_t j = 0; j < ncols; ++j) {
            if (grid[i][j].rows() != row_heights[i])
                throw ShapeMismatch("block_expr: inconsistent block heights");
            if (i == 0) col_widths[j] = grid[0][j].cols();
            if (grid[i][j].cols() != col_widths[j])
                throw ShapeMismatch("block_expr: inconsistent block widths");
        }
    }
    int total_rows = 0, total_cols = 0;
    for (int h : row_heights) total_rows += h;
    for (int w : col_widths) total_cols += w;

    AffineMatrixExpr out = AffineMatrixExpr::zero(total_rows, total_cols);
    int roff = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        int coff = 0;
        for (std::size_t j = 0; j < ncols; ++j) {
            const auto& e = grid[i][j];
            out.constant.block(roff, coff, e.rows(), e.cols()) = e.constant;
            for (const auto& t : e.terms) {
                // Embed L X R into the big matrix: rows shift by roff via a
                // selector on the left, columns by coff on the right.
                Matrix L = Matrix::Zero(total_rows, t.left.rows());
                L.middleRows(roff, t.left.rows()) =
                    Matrix::Identity(t.left.rows(), t.left.rows());
                Matrix R = Matrix::Zero(t.right.cols(), total_cols);
                R.middleCols(coff, t.right.cols()) =
                    Matrix::Identity(t.right.cols(), t.right.cols());
                out.terms.push_back({L * t.left, t.var, t.right * R,
                                     t.transposed, t.coeff});
            }
            coff += col_widths[j];
        }
        roff += row_heights[i];
    }
    return out;
}

VarId SdpProblem::declare_var(int rows, int cols, bool symmetric) {
    if (rows < 1 || cols < 1)
        throw ShapeMismatch("declare_var: dimensions must be >= 1");
    if (symmetric && rows != cols)
        throw ShapeMismatch("declare_var: symmetric variable must be square");
    const VarId id = static_cast<VarId>(vars.size());
    vars.push_back({id, rows, cols, symmetric});
    return id;
}

const MatrixVar& SdpProblem::var(VarId id) const {
    if (id < 0 || id >= static_cast<VarId>(vars.size()))
        throw ShapeMismatch("unknown variable id");
    return vars[static_cast<std::size_t>(id)];
}

namespace {

void check_expr(const SdpProblem& p, const AffineMatrixExpr& e) {
    for (const auto& t : e.terms) {
        const auto& v = p.var(t.var);
        const int vr = t.transposed ? v.cols : v.rows;
        const int vc = t.transposed ? v.rows : v.cols;
        if (t.left.cols() != vr || t.right.rows() != vc ||
            t.left.rows() != e.rows() || t.right.cols() != e.cols())
            throw ShapeMismatch("affine term does not conform to result shape");
    }
}

}  // namespace

void SdpProblem::constrain_psd(const AffineMatrixExpr& expr) {
    if (expr.rows() != expr.cols())
        throw ShapeMismatch("constrain_psd: expression must be square");
    check_expr(*this, expr);
    psd_constraints.push_back(expr);
}

void SdpProblem::constrain_eq(const AffineMatrixExpr& expr) {
    check_expr(*this, expr);
    eq_constraints.push_back(expr);
}

void SdpProblem::add_objective(const Matrix& C, VarId v) {
    const auto& mv = var(v);
    if (C.rows() != mv.rows || C.cols() != mv.cols)
        throw ShapeMismatch("add_objective: coefficient shape mismatch");
    objective.terms.emplace_back(C, v);
}

Matrix SdpProblem::evaluate(const AffineMatrixExpr& expr,
                            const std::map<VarId, Matrix>& values) const {
    Matrix out = expr.constant;
    for (const auto& t : expr.terms) {
        const Matrix& X = values.at(t.var);
        out += t.coeff * t.left * (t.transposed ? Matrix(X.transpose()) : X) *
               t.right;
    }
    return out;
}

double SdpProblem::evaluate_objective(
    const std::map<VarId, Matrix>& values) const {
    double out = objective.constant;
    for (const auto& [C, v] : objective.terms)
        out += (C.array() * values.at(v).array()).sum();
    return out;
}

void SdpProblem::check_shapes() const {
    for (const auto& e : psd_constraints) check_expr(*this, e);
    for (const auto& e : eq_constraints) check_expr(*this, e);
    for (const auto& [C, v] : objective.terms) {
        const auto& mv = var(v);
        if (C.rows() != mv.rows || C.cols() != mv.cols)
            throw ShapeMismatch("objective coefficient shape mismatch");
    }
}

ResidualReport check_solution(const SdpProblem& p, const SdpSolution& sol) {
    ResidualReport report;
    report.objective = p.evaluate_objective(sol.values);
    report.min_psd_eig = 0.0;
    for (const auto& e : p.eq_constraints) {
        const Matrix r = p.evaluate(e, sol.values);
        const double v = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
        report.eq_residuals.push_back(v);
        report.max_eq_residual = std::max(report.max_eq_residual, v);
    }
    bool first = true;
    for (const auto& e : p.psd_constraints) {
        const Matrix m = p.evaluate(e, sol.values);
        const double lmin = sym_eig(sym_part(m)).eigenvalues.minCoeff();
        report.psd_min_eigs.push_back(lmin);
        report.min_psd_eig = first ? lmin : std::min(report.min_psd_eig, lmin);
        first = false;
    }
    return report;
}

std::string to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::Optimal: return "Optimal";
        case SdpStatus::PrimalInfeasible: return "PrimalInfeasible";
        case SdpStatus::DualInfeasible: return "DualInfeasible";
        case SdpStatus::MaxIterations: return "MaxIterations";
        case SdpStatus::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

namespace {

void dump_matrix(std::ostringstream& out, const Matrix& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        out << "    ";
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            out << M(i, j) << (j + 1 < M.cols() ? " " : "");
        out << "\n";
    }
}

void dump_expr(std::ostringstream& out, const AffineMatrixExpr& e) {
    out << "  constant (" << e.rows() << "x" << e.cols() << "):\n";
    dump_matrix(out, e.constant);
    for (const auto& t : e.terms) {
        out << "  term coeff=" << t.coeff << " var=" << t.var
            << (t.transposed ? " transposed" : "") << "\n";
        out << "  left:\n";
        dump_matrix(out, t.left);
        out << "  right:\n";
        dump_matrix(out, t.right);
    }
}

}  // namespace

std::string dump(const SdpProblem& p) {
    std::ostringstream out;
    out.precision(17);
    out << "vars " << p.vars.size() << "\n";
    for (const auto& v : p.vars)
        out << "var " << v.id << " " << v.rows << "x" << v.cols
            << (v.symmetric ? " symmetric" : "") << "\n";
    out << "objective constant " << p.objective.constant << "\n";
    for (const auto& [C, v] : p.objective.terms) {
        out << "objective term var=" << v << "\n";
        dump_matrix(out, C);
    }
    for (std::size_t i = 0; i < p.psd_constraints.size(); ++i) {
        out << "psd_constraint " << i << "\n";
        dump_expr(out, p.psd_constraints[i]);
    }
    for (std::size_t i = 0; i < p.eq_constraints.size(); ++i) {
        out << "eq_constraint " << i << "\n";
        dump_expr(out, p.eq_constraints[i]);
    }
    return out.str();
}

}  // namespace ddlqr::sdp

#include "ddlqr/model.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <nlohmann/json.hpp>

#include "ddlqr/rng.hpp"

namespace ddlqr {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& rows) {
    const auto r = rows.size();
    if (r == 0) throw IoError("matrix_from_json: empty matrix");
    const auto c = rows[0].size();
    Matrix M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i) {
        if (rows[i].size() != c) throw IoError("matrix_from_json: ragged rows");
        for (std::size_t j = 0; j < c; ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows[i][j].get<double>();
    }
    return M;
}

}  // namespace

void LinearSystem::validate() const {
    const int nn = n();
    if (A.cols() != nn || B.rows() != nn || W.rows() != nn || W.cols() != nn ||
        V.rows() != nn || V.cols() != nn)
        throw DimensionMismatch("LinearSystem: inconsistent dimensions");
    cholesky(W);  // W > 0
    cholesky(V);  // V > 0
}

std::pair<Matrix, Matrix> discretize_zoh(const ContinuousSystem& cs, double Ts) {
    if (Ts <= 0.0) throw Error("discretize_zoh: Ts must be positive");
    const auto n = cs.Ac.rows();
    const auto m = cs.Bc.cols();
    Matrix aug = Matrix::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = cs.Ac;
    aug.topRightCorner(n, m) = cs.Bc;
    Matrix e = (aug * Ts).exp();
    if (!e.allFinite())
        throw NonConvergence("discretize_zoh: matrix exponential overflow");
    return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

std::pair<Matrix, Matrix> discretize(const ContinuousSystem& cs, double Ts,
                                     DiscretizationMethod method) {
    if (method == DiscretizationMethod::ZeroOrderHold)
        return discretize_zoh(cs, Ts);
    const auto n = cs.Ac.rows();
    return {Matrix::Identity(n, n) + Ts * cs.Ac, Ts * cs.Bc};
}

SuspensionSetup make_suspension() {
    const double ms = 240.0, mu = 36.0, bs = 980.0, ks = 16000.0, kt = 160000.0;
    Matrix Ac(4, 4);
    Ac << 0, 1, 0, -1,
          -ks / ms, -bs / ms, 0, bs / ms,
          0, 0, 0, 1,
          ks / mu, bs / mu, -kt / mu, -bs / mu;
    Matrix Bc(4, 1);
    Bc << 0, 1.0 / ms, 0, -1.0 / mu;

    SuspensionSetup s;
    s.continuous = {Ac, Bc};
    s.Ts = 0.05;
    auto [A, B] = discretize_zoh(s.continuous, s.Ts);
    s.sys = {A, B, 1e-7 * Matrix::Identity(4, 4), 2e-5 * Matrix::Identity(4, 4)};
    s.Q = Vector{{10000.0, 1.0, 1.0, 1.0}}.asDiagonal();
    s.R = Matrix::Constant(1, 1, 1e-6);
    s.x0 = Vector{{0.3, -4.0, 0.1, -1.0}};
    s.excitation = {Matrix::Zero(1, 4), 400.0};
    s.name = "suspension";
    return s;
}

ExampleSetup make_pendulum() {
    Matrix A(4, 4);
    A << 1.0, 0.63, 0.037, 0.0023,
         0.0, 1.31, -0.013, 0.054,
         0.0, 6.23, 0.52, 0.14,
         0.0, 1.24, -0.49, 1.27;
    Matrix B(4, 1);
    B << 0.053, 0.054, 2.00, 2.05;

    ExampleSetup s;
    s.sys = {A, B, 1e-6 * Matrix::Identity(4, 4), 2e-4 * Matrix::Identity(4, 4)};
    s.Q = Vector{{1.0, 100.0, 1.0, 100.0}}.asDiagonal();
    s.R = Matrix::Constant(1, 1, 10.0);
    s.x0 = Vector{{0.2, -0.2, 0.0, 0.0}};
    Matrix K0(1, 4);
    K0 << 0.87, -16.65, 0.73, -1.30;
    s.excitation = {K0, 0.45};
    s.Ts = 0.05;
    s.name = "pendulum";
    return s;
}

Trajectory simulate(const LinearSystem& sys, const ExcitationPolicy& policy,
                    const Vector& x0, int steps, std::uint64_t seed) {
    if (steps < 1) throw Error("simulate: steps must be >= 1");
    const int n = sys.n();
    const int m = sys.m();
    if (policy.K0.rows() != m || policy.K0.cols() != n || policy.sigma < 0.0)
        throw DimensionMismatch("simulate: bad excitation policy");
    if (x0.size() != n) throw DimensionMismatch("simulate: bad x0");

    const Matrix Lw = cholesky(sys.W);
    const Matrix Lv = cholesky(sys.V);

    GaussianStream g(seed);
    auto draw = [&g](int len) {
        Vector z(len);
        for (int i = 0; i < len; ++i) z[i] = g.next();
        return z;
    };

    Trajectory traj;
    traj.seed = seed;
    traj.states.resize(n, steps + 1);
    traj.measurements.resize(n, steps + 1);
    traj.inputs.resize(m, steps);

    Vector x = x0;
    for (int k = 0; k < steps; ++k) {
        traj.states.col(k) = x;
        const Vector y = x + Lv * draw(n);
        traj.measurements.col(k) = y;
        const Vector u = policy.K0 * y + policy.sigma * draw(m);
        traj.inputs.col(k) = u;
        x = sys.A * x + sys.B * u + Lw * draw(n);
    }
    traj.states.col(steps) = x;
    traj.measurements.col(steps) = x + Lv * draw(n);
    return traj;
}

Trajectory simulate(const LinearSystem& sys, const Matrix& K, const Vector& x0,
                    int steps, std::uint64_t seed) {
    return simulate(sys, ExcitationPolicy{K, 0.0}, x0, steps, seed);
}

bool replay_check(const LinearSystem& sys, const ExcitationPolicy& policy,
                  const Trajectory& traj, double tol) {
    Trajectory replayed =
        simulate(sys, policy, traj.states.col(0), traj.steps(), traj.seed);
    return (replayed.states - traj.states).cwiseAbs().maxCoeff() <= tol &&
           (replayed.measurements - traj.measurements).cwiseAbs().maxCoeff() <=
               tol &&
           (replayed.inputs - traj.inputs).cwiseAbs().maxCoeff() <= tol;
}

std::string Trajectory::to_json() const {
    json j;
    j["n"] = n();
    j["m"] = m();
    j["T"] = steps();
    j["seed"] = seed;
    j["states"] = matrix_to_json(states);
    j["measurements"] = matrix_to_json(measurements);
    j["inputs"] = matrix_to_json(inputs);
    return j.dump(2);
}

Trajectory Trajectory::from_json(const std::string& text) {
    json j = json::parse(text);
    Trajectory t;
    t.seed = j.at("seed").get<std::uint64_t>();
    t.states = matrix_from_json(j.at("states"));
    t.measurements = matrix_from_json(j.at("measurements"));
    t.inputs = matrix_from_json(j.at("inputs"));
    if (t.states.rows() != j.at("n").get<int>() ||
        t.inputs.rows() != j.at("m").get<int>() ||
        t.steps() != j.at("T").get<int>())
        throw IoError("Trajectory::from_json: inconsistent header");
    return t;
}

}  // namespace ddlqr

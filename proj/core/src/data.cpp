#include "ddlqr/data.hpp"

#include <Eigen/SVD>
#include <nlohmann/json.hpp>
#include <sstream>

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

void DataSet::validate() const {
    if (U0.cols() != Y0.cols() || Y0.cols() != Y1.cols() ||
        Y0.rows() != Y1.rows() || U0.cols() < 1)
        throw DimensionMismatch("DataSet: inconsistent column counts");
}

Matrix DataSet::D0() const {
    Matrix d(m() + n(), N());
    d.topRows(m()) = U0;
    d.bottomRows(n()) = Y0;
    return d;
}

DataSet collect(const LinearSystem& sys, const ExcitationPolicy& excitation,
                const Vector& x0, int N, std::uint64_t seed) {
    if (N < 1) throw Error("collect: N must be >= 1");
    Trajectory traj = simulate(sys, excitation, x0, N, seed);
    return from_trajectory(traj, "collect");
}

DataSet from_trajectory(const Trajectory& traj, const std::string& origin) {
    const int N = traj.steps();
    DataSet ds;
    ds.U0 = traj.inputs;
    ds.Y0 = traj.measurements.leftCols(N);
    ds.Y1 = traj.measurements.rightCols(N);
    ds.seed = traj.seed;
    ds.origin = origin;
    return ds;
}

InformativityResult informativity_rank(const DataSet& ds, double tol) {
    ds.validate();
    Eigen::JacobiSVD<Matrix> svd(ds.D0());
    const Vector sv = svd.singularValues();
    const double cutoff = tol * sv.maxCoeff();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) ++rank;
    return {rank, rank == ds.m() + ds.n()};
}

std::string DataSet::to_json() const {
    json j;
    j["n"] = n();
    j["m"] = m();
    j["N"] = N();
    j["seed"] = seed;
    j["origin"] = origin;
    j["U0"] = matrix_to_json(U0);
    j["Y0"] = matrix_to_json(Y0);
    j["Y1"] = matrix_to_json(Y1);
    return j.dump(2);
}

DataSet DataSet::from_json(const std::string& text) {
    json j = json::parse(text);
    DataSet ds;
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.origin = j.at("origin").get<std::string>();
    ds.U0 = matrix_from_json(j.at("U0"));
    ds.Y0 = matrix_from_json(j.at("Y0"));
    ds.Y1 = matrix_from_json(j.at("Y1"));
    ds.validate();
    if (ds.n() != j.at("n").get<int>() || ds.m() != j.at("m").get<int>() ||
        ds.N() != j.at("N").get<int>())
        throw IoError("DataSet::from_json: inconsistent header");
    return ds;
}

std::string DataSet::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "sample";
    for (int i = 0; i < m(); ++i) out << ",u" << i;
    for (int i = 0; i < n(); ++i) out << ",y0_" << i;
    for (int i = 0; i < n(); ++i) out << ",y1_" << i;
    out << "\n";
    for (int k = 0; k < N(); ++k) {
        out << k;
        for (int i = 0; i < m(); ++i) out << "," << U0(i, k);
        for (int i = 0; i < n(); ++i) out << "," << Y0(i, k);
        for (int i = 0; i < n(); ++i) out << "," << Y1(i, k);
        out << "\n";
    }
    return out.str();
}

}  // namespace ddlqr

#pragma once

#include <nlohmann/json.hpp>

#include "ddlqr/errors.hpp"
#include "ddlqr/linalg.hpp"

namespace ddlqr::detail {

inline nlohmann::json matrix_to_json(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& rows) {
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

}  // namespace ddlqr::detail

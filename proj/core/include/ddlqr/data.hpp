#pragma once

#include <cstdint>
#include <string>

#include "ddlqr/linalg.hpp"
#include "ddlqr/model.hpp"

namespace ddlqr {

// The only thing synthesis ever sees: N columns of inputs and noisy
// measurements. The clean states and noise realizations stay inside the
// simulator.
struct DataSet {
    Matrix U0;  // m x N
    Matrix Y0;  // n x N
    Matrix Y1;  // n x N
    std::uint64_t seed = 0;
    std::string origin;

    int n() const { return static_cast<int>(Y0.rows()); }
    int m() const { return static_cast<int>(U0.rows()); }
    int N() const { return static_cast<int>(U0.cols()); }

    void validate() const;

    // Stacked data matrix D0 = [U0; Y0], (m+n) x N.
    Matrix D0() const;

    std::string to_json() const;
    static DataSet from_json(const std::string& text);

    // One column per sample, header row naming u/y components.
    std::string to_csv() const;
};

// Runs a fresh length-N simulation and slices it into (U0, Y0, Y1).
DataSet collect(const LinearSystem& sys, const ExcitationPolicy& excitation,
                const Vector& x0, int N, std::uint64_t seed);

// Builds the data matrices from an existing trajectory (first N steps).
DataSet from_trajectory(const Trajectory& traj, const std::string& origin);

struct InformativityResult {
    int rank = 0;
    bool ok = false;  // rank == m + n
};

// Numerical rank of D0 via singular values above tol * sigma_max.
InformativityResult informativity_rank(const DataSet& ds, double tol = 1e-10);

}  // namespace ddlqr

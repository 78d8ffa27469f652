#pragma once

#include <cstdint>
#include <string>

#include "ddlqr/linalg.hpp"

namespace ddlqr {

// True stochastic plant x_{k+1} = A x_k + B u_k + w_k, y_k = x_k + v_k,
// w ~ N(0, W), v ~ N(0, V). Ground truth for simulation and certification;
// synthesis never sees A or B.
struct LinearSystem {
    Matrix A;  // n x n
    Matrix B;  // n x m
    Matrix W;  // n x n, process-noise covariance, PD
    Matrix V;  // n x n, measurement-noise covariance, PD

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }

    void validate() const;
};

struct ContinuousSystem {
    Matrix Ac;  // n x n
    Matrix Bc;  // n x m
};

// Data-collection input u_k = K0 y_k + sigma * eta_k with eta ~ N(0, I).
struct ExcitationPolicy {
    Matrix K0;     // m x n feedback part (zero for open-loop dither)
    double sigma;  // >= 0
};

struct Trajectory {
    Matrix states;        // n x (T+1), columns x_0 .. x_T
    Matrix measurements;  // n x (T+1), columns y_0 .. y_T
    Matrix inputs;        // m x T, columns u_0 .. u_{T-1}
    std::uint64_t seed;

    int n() const { return static_cast<int>(states.rows()); }
    int m() const { return static_cast<int>(inputs.rows()); }
    int steps() const { return static_cast<int>(inputs.cols()); }

    std::string to_json() const;
    static Trajectory from_json(const std::string& text);
};

enum class DiscretizationMethod { ZeroOrderHold, ForwardEuler };

// Zero-order-hold discretization via the exponential of the augmented
// block matrix [[Ac, Bc], [0, 0]] * Ts.
std::pair<Matrix, Matrix> discretize_zoh(const ContinuousSystem& cs, double Ts);

std::pair<Matrix, Matrix> discretize(const ContinuousSystem& cs, double Ts,
                                     DiscretizationMethod method);

// One benchmark system: plant plus the experiment parameters that go with it.
struct ExampleSetup {
    LinearSystem sys;
    Matrix Q;
    Matrix R;
    Vector x0;
    ExcitationPolicy excitation;
    double Ts = 0.0;
    std::string name;
};

// Quarter-car active suspension (continuous dynamics, sampled by ZOH).
struct SuspensionSetup : ExampleSetup {
    ContinuousSystem continuous;
};

SuspensionSetup make_suspension();

// Quanser rotary inverted pendulum, linearized upright, already discrete.
ExampleSetup make_pendulum();

// Simulate T steps under u_k = K0 y_k + sigma * eta_k. Deterministic given
// the seed; noise draw order per step k is v_k, eta_k, w_k (and a final
// v_T for the last measurement), so a trajectory can be replayed exactly.
Trajectory simulate(const LinearSystem& sys, const ExcitationPolicy& policy,
                    const Vector& x0, int steps, std::uint64_t seed);

// Fixed-gain convenience: u_k = K y_k.
Trajectory simulate(const LinearSystem& sys, const Matrix& K, const Vector& x0,
                    int steps, std::uint64_t seed);

// Re-runs the recurrence with the recorded noise draws and checks that the
// stored states, measurements, and inputs are reproduced.
bool replay_check(const LinearSystem& sys, const ExcitationPolicy& policy,
                  const Trajectory& traj, double tol = 1e-12);

}  // namespace ddlqr

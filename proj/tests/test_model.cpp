#include <doctest.h>

#include <cmath>

#include "ddlqr/data.hpp"
#include "ddlqr/linalg.hpp"
#include "ddlqr/model.hpp"
#include "ddlqr/rng.hpp"

using namespace ddlqr;

TEST_CASE("zoh of an integrator") {
    ContinuousSystem cs{Matrix::Zero(2, 2), Matrix::Identity(2, 2)};
    auto [A, B] = discretize_zoh(cs, 0.1);
    CHECK(A.isApprox(Matrix::Identity(2, 2), 1e-14));
    CHECK(B.isApprox(0.1 * Matrix::Identity(2, 2), 1e-14));
}

TEST_CASE("zoh scalar closed form") {
    ContinuousSystem cs{Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0)};
    auto [A, B] = discretize_zoh(cs, 1.0);
    CHECK(A(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(B(0, 0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("zoh of the suspension matches fine-grid integration") {
    const auto setup = make_suspension();
    // One ZOH step from a fixed (x0, u) against forward Euler at dt = 1e-5.
    Vector x{{0.3, -4.0, 0.1, -1.0}};
    const Vector u = Vector::Constant(1, 100.0);
    const double dt = 1e-7;
    Vector xf = x;
    const int steps = static_cast<int>(setup.Ts / dt + 0.5);
    for (int i = 0; i < steps; ++i)
        xf += dt * (setup.continuous.Ac * xf + setup.continuous.Bc * u);
    const Vector xz = setup.sys.A * x + setup.sys.B * u;
    CHECK((xf - xz).norm() <= 1e-4 * (1.0 + xz.norm()));
}

TEST_CASE("suspension parameters") {
    const auto s = make_suspension();
    CHECK(s.continuous.Ac(1, 0) == doctest::Approx(-16000.0 / 240.0));
    CHECK(s.continuous.Bc(3, 0) == doctest::Approx(-1.0 / 36.0));
    CHECK(s.sys.W.isApprox(1e-7 * Matrix::Identity(4, 4)));
    CHECK(s.sys.V.isApprox(2e-5 * Matrix::Identity(4, 4)));
    CHECK(s.Q(0, 0) == 10000.0);
    CHECK(s.R(0, 0) == 1e-6);
    CHECK(s.excitation.sigma == 400.0);
    CHECK(s.excitation.K0.isZero(0.0));
    // Damped mechanical system: open loop is Schur stable after sampling.
    CHECK(spectral_radius(s.sys.A) < 1.0);
}

TEST_CASE("pendulum parameters") {
    const auto s = make_pendulum();
    CHECK(s.sys.A(2, 1) == doctest::Approx(6.23));
    Matrix B_expected(4, 1);
    B_expected << 0.053, 0.054, 2.00, 2.05;
    CHECK(s.sys.B.isApprox(B_expected));
    CHECK(s.Q(1, 1) == 100.0);
    CHECK(s.R(0, 0) == 10.0);
    // Upright equilibrium is unstable.
    CHECK(spectral_radius(s.sys.A) > 1.0);
}

TEST_CASE("simulate noise-free limit follows the deterministic recursion") {
    auto setup = make_pendulum();
    LinearSystem sys = setup.sys;
    sys.W = 1e-30 * Matrix::Identity(4, 4);
    sys.V = 1e-30 * Matrix::Identity(4, 4);
    const Matrix K = Matrix::Zero(1, 4);
    const auto traj = simulate(sys, K, setup.x0, 6, 17);
    Vector x = setup.x0;
    for (int k = 0; k <= 6; ++k) {
        CHECK((traj.states.col(k) - x).norm() <= 1e-9 * (1.0 + x.norm()));
        x = sys.A * x;
    }
}

TEST_CASE("simulate is deterministic and replays") {
    const auto setup = make_pendulum();
    const auto t1 = simulate(setup.sys, setup.excitation, setup.x0, 10, 123);
    const auto t2 = simulate(setup.sys, setup.excitation, setup.x0, 10, 123);
    CHECK(t1.states == t2.states);
    CHECK(t1.measurements == t2.measurements);
    CHECK(t1.inputs == t2.inputs);
    CHECK(replay_check(setup.sys, setup.excitation, t1));

    const auto t3 = simulate(setup.sys, setup.excitation, setup.x0, 10, 124);
    CHECK(t1.states != t3.states);
}

TEST_CASE("trajectory json round trip") {
    const auto setup = make_suspension();
    const auto t = simulate(setup.sys, setup.excitation, setup.x0, 5, 77);
    const auto back = Trajectory::from_json(t.to_json());
    CHECK(back.seed == t.seed);
    CHECK(back.states.isApprox(t.states, 1e-15));
    CHECK(back.inputs.isApprox(t.inputs, 1e-15));
}

TEST_CASE("process-noise sample covariance matches W within 5 percent") {
    auto setup = make_pendulum();
    // Give the noise some structure so the test is not trivially diagonal.
    Matrix W(4, 4);
    W << 4, 1, 0, 0,
         1, 3, 0, 1,
         0, 0, 2, 0,
         0, 1, 0, 5;
    LinearSystem sys{Matrix::Zero(4, 4), Matrix::Zero(4, 1), W,
                     Matrix::Identity(4, 4)};
    // With A = 0, B = 0 and K = 0 the state is exactly the process noise.
    const auto traj =
        simulate(sys, Matrix::Zero(1, 4), Vector::Zero(4), 100000, 2718);
    const Matrix draws = traj.states.rightCols(100000);
    const Matrix cov = draws * draws.transpose() / 100000.0;
    CHECK((cov - W).norm() <= 0.05 * W.norm());
}

TEST_CASE("long-run state covariance matches the lyapunov prediction") {
    const auto setup = make_suspension();
    const Matrix K = Matrix::Zero(1, 4);  // open loop, stable
    const int T = 100000, burn = 1000;
    const auto traj = simulate(setup.sys, K, setup.x0, T, 5150);
    const Matrix X = traj.states.middleCols(burn, T - burn);
    const Matrix cov = X * X.transpose() / double(T - burn);
    const Matrix predicted =
        solve_discrete_lyapunov(setup.sys.A, setup.sys.W);
    CHECK((cov - predicted).norm() <= 0.10 * predicted.norm());
}

#include <doctest.h>

#include "ddlqr/data.hpp"
#include "ddlqr/model.hpp"
#include "ddlqr/rng.hpp"

using namespace ddlqr;

TEST_CASE("collect with N=1") {
    const auto setup = make_pendulum();
    const auto ds = collect(setup.sys, setup.excitation, setup.x0, 1, 9);
    CHECK(ds.N() == 1);
    const auto traj = simulate(setup.sys, setup.excitation, setup.x0, 1, 9);
    CHECK(ds.Y0.col(0) == traj.measurements.col(0));
    CHECK(ds.Y1.col(0) == traj.measurements.col(1));
    CHECK(ds.U0.col(0) == traj.inputs.col(0));
}

TEST_CASE("noise-free limit satisfies Y1 = A Y0 + B U0") {
    auto setup = make_pendulum();
    LinearSystem sys = setup.sys;
    sys.W = 1e-30 * Matrix::Identity(4, 4);
    sys.V = 1e-30 * Matrix::Identity(4, 4);
    const auto ds = collect(sys, setup.excitation, setup.x0, 10, 4);
    const Matrix pred = sys.A * ds.Y0 + sys.B * ds.U0;
    CHECK((ds.Y1 - pred).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("dataset json round trip is bit exact") {
    const auto setup = make_pendulum();
    const auto ds = collect(setup.sys, setup.excitation, setup.x0, 10, 42);
    const auto back = DataSet::from_json(ds.to_json());
    CHECK(back.U0 == ds.U0);
    CHECK(back.Y0 == ds.Y0);
    CHECK(back.Y1 == ds.Y1);
    CHECK(back.seed == ds.seed);
    CHECK(back.origin == ds.origin);
}

TEST_CASE("csv export has one column block per signal") {
    const auto setup = make_pendulum();
    const auto ds = collect(setup.sys, setup.excitation, setup.x0, 3, 1);
    const std::string csv = ds.to_csv();
    CHECK(csv.find("sample,u0,y0_0") == 0);
    // Header plus N data rows.
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("informativity: zero input row caps the rank") {
    SplitMix64 rng(8);
    DataSet ds;
    ds.U0 = Matrix::Zero(1, 10);
    ds.Y0 = Matrix(4, 10);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 10; ++j) ds.Y0(i, j) = rng.next_uniform();
    ds.Y1 = ds.Y0;
    const auto r = informativity_rank(ds);
    CHECK(r.rank <= 4);
    CHECK_FALSE(r.ok);
}

TEST_CASE("informativity: too few columns can never be informative") {
    const auto setup = make_pendulum();
    const auto ds = collect(setup.sys, setup.excitation, setup.x0, 4, 3);
    const auto r = informativity_rank(ds);
    CHECK_FALSE(r.ok);  // N = 4 < m + n = 5
}

TEST_CASE("pendulum collection is informative for virtually every seed") {
    const auto setup = make_pendulum();
    int ok = 0;
    for (int seed = 0; seed < 100; ++seed) {
        const auto ds =
            collect(setup.sys, setup.excitation, setup.x0, 10, seed);
        if (informativity_rank(ds).ok) ++ok;
    }
    CHECK(ok >= 99);
}

TEST_CASE("suspension collection is informative for virtually every seed") {
    const auto setup = make_suspension();
    int ok = 0;
    for (int seed = 0; seed < 100; ++seed) {
        const auto ds =
            collect(setup.sys, setup.excitation, setup.x0, 10, seed);
        if (informativity_rank(ds).ok) ++ok;
    }
    CHECK(ok >= 99);
}

TEST_CASE("rebuilding from the stored trajectory reproduces the data") {
    const auto setup = make_suspension();
    const auto traj = simulate(setup.sys, setup.excitation, setup.x0, 10, 11);
    const auto ds1 = from_trajectory(traj, "a");
    const auto ds2 = collect(setup.sys, setup.excitation, setup.x0, 10, 11);
    CHECK(ds1.U0 == ds2.U0);
    CHECK(ds1.Y0 == ds2.Y0);
    CHECK(ds1.Y1 == ds2.Y1);
}

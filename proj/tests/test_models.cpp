#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "ppr/models.hpp"
#include "ppr/sim.hpp"
#include "support/oracles.hpp"

using namespace ppr;
namespace fs = std::filesystem;

TEST_CASE("aircraft model evaluates to the hand-computed values", "[models]") {
    auto [dyn, cost] = aircraft_f8();
    CHECK(dyn.drift<double>(Vector::Zero(3)).norm() == 0.0);
    CHECK((dyn.input_map<double>(Vector::Zero(3)) - dyn.B).norm() == 0.0);

    Vector x(3);
    x << 0.1, 0.0, 0.0;
    Vector f = dyn.drift<double>(x);
    CHECK(f[0] == Catch::Approx(-0.877 * 0.1 + 0.47 * 0.01 + 3.846 * 0.001).epsilon(1e-14));
    CHECK(f[1] == 0.0);
    CHECK(f[2] == Catch::Approx(-4.208 * 0.1 - 0.47 * 0.01 - 3.564 * 0.001).epsilon(1e-14));
    CHECK(f[0] == Catch::Approx(-0.079154).margin(1e-12));  // -0.0877 + 0.0047 + 0.003846
    CHECK(f[2] == Catch::Approx(-0.429064).margin(1e-12));  // -0.4208 - 0.0047 - 0.003564

    Matrix g = dyn.input_map<double>(x);
    CHECK(g(0, 0) == Catch::Approx(-0.215 + 0.28 * 0.01).epsilon(1e-14));
    CHECK(g(1, 0) == 0.0);
    CHECK(g(2, 0) == Catch::Approx(-20.967 + 6.265 * 0.01).epsilon(1e-14));

    CHECK((cost.Q - 0.25 * Matrix::Identity(3, 3)).norm() == 0.0);
    CHECK(cost.R(0, 0) == 1.0);
}

TEST_CASE("aircraft cross term x1 x3 acts on the drift", "[models]") {
    auto [dyn, cost] = aircraft_f8();
    Vector x(3);
    x << 0.2, 0.0, 0.3;
    Vector f = dyn.drift<double>(x);
    // row 1: x3 - x1^2 x3 - 0.088 x1 x3 - 0.877 x1 + 0.47 x1^2 + 3.846 x1^3
    const double expect =
        0.3 - 0.04 * 0.3 - 0.088 * 0.2 * 0.3 - 0.877 * 0.2 + 0.47 * 0.04 + 3.846 * 0.008;
    CHECK(f[0] == Catch::Approx(expect).epsilon(1e-13));
}

TEST_CASE("chebyshev differentiation is exact on low-degree polynomials", "[models]") {
    for (Index nodes : {9, 17, 33}) {
        auto [z, d] = chebyshev_diff(nodes);
        Vector z2 = z.array().square();
        CHECK(((d * z2) - 2.0 * z).cwiseAbs().maxCoeff() <= 1e-10);
        Vector z3 = z.array().cube();
        CHECK(((d * z3) - 3.0 * z2).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("allen_cahn produces a discrete equilibrium and consistent shapes", "[models]") {
    AllenCahnConfig cfg;
    cfg.nodes = 33;
    cfg.epsilon = 1.0;  // nearly linear profile
    cfg.z0 = 0.0;
    ShiftedModel model = allen_cahn(cfg);
    CHECK(model.dyn.n == 31);
    CHECK(model.dyn.m == 3);
    CHECK(model.equilibrium_residual <= 1e-10);
    CHECK(model.dyn.drift<double>(Vector::Zero(model.dyn.n)).norm() <= 1e-9);

    // F3 is the elementwise cube: F3 e_i^(x)3 = -e_i after the sign flip
    const Index i = 7;
    Vector e = Vector::Zero(model.dyn.n);
    e[i] = 1.0;
    Vector cubic_part = Vector(model.dyn.F.at(3) * kron_power(e, 3).data);
    CHECK(cubic_part[i] == -1.0);
    CHECK(cubic_part.cwiseAbs().sum() == 1.0);
}

TEST_CASE("benchmark configuration places controls at nodes 33, 65, 97", "[models]") {
    AllenCahnConfig cfg;
    cfg.nodes = 129;
    cfg.epsilon = 0.01;
    cfg.z0 = 0.5;
    ShiftedModel model = allen_cahn(cfg);
    CHECK(model.dyn.n == 127);
    REQUIRE(model.control_interior.size() == 3);
    CHECK(model.control_interior[0] == 31);  // node 33 (1-based) -> interior 31
    CHECK(model.control_interior[1] == 63);
    CHECK(model.control_interior[2] == 95);
    CHECK(model.z[32] == Catch::Approx(std::cos(std::numbers::pi * 32.0 / 128.0)));
    CHECK(model.equilibrium_residual <= 1e-9);
    // q4 encodes sum xbar_i^4
    Vector x = Vector::Zero(model.dyn.n);
    x[10] = 2.0;
    x[20] = -1.0;
    CHECK(model.cost.state_penalty<double>(x) ==
          Catch::Approx(0.1 * (4.0 + 1.0) + 16.0 + 1.0).epsilon(1e-13));
}

TEST_CASE("shifted simulation matches unshifted simulation", "[models][sim]") {
    AllenCahnConfig cfg;
    cfg.nodes = 17;
    cfg.epsilon = 0.05;
    cfg.z0 = 0.3;
    ShiftedModel model = allen_cahn(cfg);
    const Index n = model.dyn.n;

    // unshifted interior dynamics, with the boundary coupling as an extra
    // linear system built independently of the ShiftedModel path
    auto [z, d1] = chebyshev_diff(cfg.nodes);
    Matrix d2 = d1 * d1;
    Matrix lap = d2.block(1, 1, n, n);
    Vector affine = cfg.epsilon * (d2.block(1, 0, n, 1) * model.boundary_right +
                                   d2.block(1, cfg.nodes - 1, n, 1) * model.boundary_left);
    auto unshifted_rhs = [&](const Vector& w) -> Vector {
        return cfg.epsilon * (lap * w) + w - w.array().cube().matrix() + affine;
    };

    std::mt19937 rng(443);
    Vector x0 = oracle::random_vector(n, rng, 0.1);
    SimOptions opts;
    opts.rtol = 1e-10;
    opts.atol = 1e-12;
    opts.method = SimMethod::RK45;
    Trajectory shifted = simulate(model.dyn, nullptr, nullptr, x0, 1.0, opts);

    // reference integration of the unshifted system from x0 + x_ref (RK4)
    Vector w = x0 + model.x_ref;
    const int steps = 20000;
    const double h = 1.0 / steps;
    for (int s = 0; s < steps; ++s) {
        Vector k1 = unshifted_rhs(w);
        Vector k2 = unshifted_rhs(w + 0.5 * h * k1);
        Vector k3 = unshifted_rhs(w + 0.5 * h * k2);
        Vector k4 = unshifted_rhs(w + h * k3);
        w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Vector final_shifted = shifted.final_state() + model.x_ref;
    CHECK((final_shifted - w).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("allen_cahn rejects invalid configurations", "[models]") {
    AllenCahnConfig cfg;
    cfg.nodes = 8;
    CHECK_THROWS_AS(allen_cahn(cfg), ModelError);
    cfg.nodes = 33;
    cfg.epsilon = -1.0;
    CHECK_THROWS_AS(allen_cahn(cfg), ModelError);
    cfg.epsilon = 0.01;
    cfg.z0 = 1.5;
    CHECK_THROWS_AS(allen_cahn(cfg), ModelError);
}

TEST_CASE("model JSON round-trip is bit-exact", "[models]") {
    auto [dyn, cost] = aircraft_f8();
    const auto dir = fs::temp_directory_path() / "ppr_models_test";
    fs::create_directories(dir);
    const auto path = dir / "aircraft.json";
    save_model(path, dyn, cost, Json{{"name", "aircraft"}});
    auto [dyn2, cost2] = load_model(path);
    CHECK(dyn2.n == dyn.n);
    CHECK(dyn2.m == dyn.m);
    CHECK((dyn2.A - dyn.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((dyn2.B - dyn.B).cwiseAbs().maxCoeff() == 0.0);
    for (const auto& [p, f] : dyn.F) CHECK((Matrix(dyn2.F.at(p)) - Matrix(f)).cwiseAbs().maxCoeff() == 0.0);
    for (const auto& [p, g] : dyn.G) CHECK((Matrix(dyn2.G.at(p)) - Matrix(g)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cost2.Q - cost.Q).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cost2.R - cost.R).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("load_model rejects malformed inputs", "[models]") {
    const auto dir = fs::temp_directory_path() / "ppr_models_test";
    fs::create_directories(dir);

    SECTION("missing R") {
        const auto path = dir / "missing_r.json";
        std::ofstream(path) << R"({"n":1,"m":1,"A":[[1.0]],"B":[[1.0]],"Q":[[1.0]]})";
        CHECK_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring("R"));
    }
    SECTION("q3 with out-of-range index") {
        const auto path = dir / "bad_q3.json";
        std::ofstream(path) << R"({"n":2,"m":1,"A":[[0.0,1.0],[-1.0,-1.0]],"B":[[0.0],[1.0]],
                                   "Q":[[1.0,0.0],[0.0,1.0]],"R":[[1.0]],
                                   "q":{"3":{"coords":[[8,1.0]]}}})";
        CHECK_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring("out of range"));
    }
    SECTION("indefinite R") {
        const auto path = dir / "bad_r.json";
        std::ofstream(path) << R"({"n":1,"m":1,"A":[[-1.0]],"B":[[1.0]],"Q":[[1.0]],"R":[[-2.0]]})";
        CHECK_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring("positive definite"));
    }
    SECTION("not JSON at all") {
        const auto path = dir / "garbage.json";
        std::ofstream(path) << "not a json document {{{";
        CHECK_THROWS_AS(load_model(path), ModelError);
    }
}

TEST_CASE("open-loop metastability at reduced resolution shows three interfaces", "[models][sim]") {
    // a fast sanity version of the full 129-node check in the acceptance run
    AllenCahnConfig cfg;
    cfg.nodes = 65;
    cfg.epsilon = 0.01;
    cfg.z0 = 0.5;
    ShiftedModel model = allen_cahn(cfg);
    Vector x0 = allen_cahn_benchmark_ic(model);
    CHECK(count_interfaces(model.physical_profile(x0)) == 3);
    SimOptions opts;
    opts.rtol = 1e-6;
    opts.atol = 1e-8;
    Trajectory traj = simulate(model.dyn, nullptr, nullptr, x0, 5.0, opts);
    REQUIRE_FALSE(traj.diverged);
    CHECK(count_interfaces(model.physical_profile(traj.final_state())) == 3);
}

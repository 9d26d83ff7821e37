#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ppr/control.hpp"
#include "support/oracles.hpp"

using namespace ppr;

namespace {

ValueFunction random_value(std::mt19937& rng, Index n, int d) {
    ValueFunction value;
    value.n = n;
    value.degree = d;
    for (int k = 2; k <= d; ++k)
        value.coeffs.push_back(oracle::permutation_average(oracle::random_vector(kron_length(n, k), rng), n, k));
    return value;
}

std::pair<PolyDynamics, PolyCost> scalar_lq() {
    PolyDynamics dyn;
    dyn.n = 1;
    dyn.m = 1;
    dyn.A = Matrix::Constant(1, 1, -1.0);
    dyn.B = Matrix::Constant(1, 1, 1.0);
    PolyCost cost;
    cost.Q = Matrix::Identity(1, 1);
    cost.R = Matrix::Identity(1, 1);
    return {std::move(dyn), std::move(cost)};
}

}  // namespace

TEST_CASE("eval_value basics and scalar closed forms", "[control]") {
    const double p = std::sqrt(2.0) - 1.0;
    ValueFunction value;
    value.n = 1;
    value.degree = 2;
    value.coeffs.push_back(Vector::Constant(1, p));
    CHECK(eval_value(value, Vector::Zero(1)) == 0.0);
    CHECK(eval_value(value, Vector::Constant(1, 2.0)) == Catch::Approx(2.0 * (std::sqrt(2.0) - 1.0)).epsilon(1e-14));

    const double v3 = (2.0 - std::sqrt(2.0)) / 3.0;
    value.degree = 3;
    value.coeffs.push_back(Vector::Constant(1, v3));
    const double expect = 0.5 * (p * 0.01 + v3 * 0.001);
    CHECK(eval_value(value, Vector::Constant(1, 0.1)) == Catch::Approx(expect).epsilon(1e-14));
    CHECK(expect == Catch::Approx(0.0021687).margin(5e-8));
}

TEST_CASE("eval_value_gradient special cases", "[control]") {
    std::mt19937 rng(307);
    ValueFunction value = random_value(rng, 3, 2);
    CHECK(eval_value_gradient(value, Vector::Zero(3)).norm() == 0.0);
    Vector x = oracle::random_vector(3, rng);
    CHECK((eval_value_gradient(value, x) - value.v2() * x).norm() <= 1e-13 * value.v2().norm() * x.norm());
}

TEST_CASE("eval_value_gradient matches central finite differences", "[control]") {
    std::mt19937 rng(311);
    for (auto [n, d] : {std::pair<Index, int>{3, 4}, {5, 5}, {2, 5}}) {
        ValueFunction value = random_value(rng, n, d);
        Vector x = oracle::random_vector(n, rng, 0.5);
        Vector grad = eval_value_gradient(value, x);
        Vector fd = oracle::finite_difference_gradient([&](const Vector& y) { return eval_value(value, y); }, x);
        CAPTURE(n, d);
        CHECK((grad - fd).norm() <= 1e-6 * std::max(1.0, grad.norm()));
    }
}

TEST_CASE("extract_gains reproduces the LQR gain and nothing else for LQ", "[control]") {
    auto [dyn, cost] = scalar_lq();
    ValueFunction value = synthesize(dyn, cost, 2);
    PolyController ctrl = extract_gains(value, dyn, cost.R);
    REQUIRE(ctrl.degree() == 1);
    CHECK(ctrl.gain(1)(0, 0) == Catch::Approx(-(std::sqrt(2.0) - 1.0)).epsilon(1e-12));
}

TEST_CASE("K1 equals the Riccati gain to machine precision", "[control]") {
    std::mt19937 rng(313);
    const Index n = 4, m = 2;
    PolyDynamics dyn;
    dyn.n = n;
    dyn.m = m;
    dyn.A = oracle::random_matrix(n, n, rng);
    dyn.B = oracle::random_matrix(n, m, rng);
    PolyCost cost;
    cost.Q = Matrix::Identity(n, n);
    cost.R = 2.0 * Matrix::Identity(m, m);
    ValueFunction value = synthesize(dyn, cost, 3);
    PolyController ctrl = extract_gains(value, dyn, cost.R);
    const Matrix expect = -cost.R.ldlt().solve(dyn.B.transpose() * value.v2());
    CHECK((ctrl.gain(1) - expect).cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, expect.norm()));
}

TEST_CASE("higher gains are zero for quadratic values without input-map terms", "[control]") {
    std::mt19937 rng(317);
    const Index n = 3;
    PolyDynamics dyn;
    dyn.n = n;
    dyn.m = 1;
    dyn.A = oracle::random_matrix(n, n, rng);
    dyn.B = oracle::random_matrix(n, 1, rng);
    ValueFunction value = random_value(rng, n, 4);
    value.coeffs[1].setZero();
    value.coeffs[2].setZero();
    PolyController ctrl = extract_gains(value, dyn, Matrix::Identity(1, 1));
    CHECK(ctrl.gain(2).norm() == 0.0);
    CHECK(ctrl.gain(3).norm() == 0.0);
}

TEST_CASE("state-dependent input maps contribute even without cubic value terms", "[control]") {
    std::mt19937 rng(331);
    const Index n = 2, m = 1;
    PolyDynamics dyn;
    dyn.n = n;
    dyn.m = m;
    dyn.A = oracle::random_matrix(n, n, rng);
    dyn.B = oracle::random_matrix(n, m, rng);
    dyn.G[1] = oracle::random_matrix(n, m * n, rng).sparseView();
    ValueFunction value = random_value(rng, n, 3);
    value.coeffs[1].setZero();  // v3 = 0, yet K^[2] != 0 through (G_1, v_2)
    PolyController ctrl = extract_gains(value, dyn, Matrix::Identity(m, m));
    CHECK(ctrl.gain(2).norm() > 1e-8);

    // pointwise agreement with -R^-1 g(x)^T dV/dx: the value is quadratic,
    // so the product is exactly degree 2 and truncation is lossless
    for (int trial = 0; trial < 100; ++trial) {
        Vector x = oracle::random_vector(n, rng);
        Vector direct = -(dyn.input_map<double>(x).transpose() * eval_value_gradient(value, x));
        Vector via_gains = eval_controller(ctrl, x);
        CHECK((direct - via_gains).norm() <= 1e-12 * std::max(1.0, direct.norm()));
    }
}

TEST_CASE("eval_controller basics", "[control]") {
    auto [dyn, cost] = scalar_lq();
    ValueFunction value = synthesize(dyn, cost, 2);
    PolyController ctrl = extract_gains(value, dyn, cost.R);
    CHECK(eval_controller(ctrl, Vector::Zero(1)).norm() == 0.0);
    CHECK(eval_controller(ctrl, Vector::Ones(1))[0] == Catch::Approx(-(std::sqrt(2.0) - 1.0)).epsilon(1e-12));
}

TEST_CASE("controller truncation error scales as ||x||^d", "[control]") {
    std::mt19937 rng(337);
    const Index n = 2, m = 1;
    PolyDynamics dyn;
    dyn.n = n;
    dyn.m = m;
    dyn.A = oracle::random_matrix(n, n, rng);
    dyn.B = oracle::random_matrix(n, m, rng);
    dyn.G[1] = oracle::random_matrix(n, m * n, rng).sparseView();
    dyn.G[2] = oracle::random_matrix(n, m * n * n, rng).sparseView();
    const int d = 4;
    ValueFunction value = random_value(rng, n, d);
    PolyController ctrl = extract_gains(value, dyn, Matrix::Identity(m, m));
    Vector dir = oracle::random_vector(n, rng);
    dir /= dir.norm();
    auto mismatch = [&](double r) {
        Vector x = r * dir;
        Vector direct = -(dyn.input_map<double>(x).transpose() * eval_value_gradient(value, x));
        return (eval_controller(ctrl, x) - direct).norm();
    };
    const double m1 = mismatch(1e-2);
    const double m2 = mismatch(1e-3);
    const double slope = std::log10(m1 / m2);
    CHECK(slope >= d - 0.5);  // dropped terms start at degree d
}

TEST_CASE("controller jacobian matches finite differences", "[control]") {
    std::mt19937 rng(347);
    const Index n = 3, m = 2;
    PolyController ctrl;
    ctrl.n = n;
    ctrl.m = m;
    for (int j = 1; j <= 3; ++j) ctrl.gains.push_back(oracle::random_matrix(m, kron_length(n, j), rng));
    Vector x = oracle::random_vector(n, rng, 0.7);
    Matrix jac = ctrl.jacobian(x);
    for (Index col = 0; col < n; ++col) {
        Vector hi = x, lo = x;
        hi[col] += 1e-6;
        lo[col] -= 1e-6;
        Vector fd = (ctrl.evaluate<double>(hi) - ctrl.evaluate<double>(lo)) / 2e-6;
        CHECK((jac.col(col) - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
    }
}

TEST_CASE("hjb_residual is tiny for the exact LQ solution", "[control]") {
    std::mt19937 rng(349);
    auto [dyn, cost] = scalar_lq();
    ValueFunction value = synthesize(dyn, cost, 2);
    for (int trial = 0; trial < 20; ++trial) {
        Vector x = oracle::random_vector(1, rng, 3.0);
        const double res = hjb_residual(dyn, cost, value, x);
        CHECK(std::abs(res) <= 1e-12 * (1.0 + std::pow(x.norm(), 4)));
    }
}

TEST_CASE("hjb_residual truncation scaling on the scalar cubic problem", "[control]") {
    PolyDynamics dyn;
    dyn.n = 1;
    dyn.m = 1;
    dyn.A = Matrix::Constant(1, 1, -1.0);
    dyn.B = Matrix::Constant(1, 1, 1.0);
    SparseMatrix f(1, 1);
    f.insert(0, 0) = 1.0;
    dyn.F[2] = std::move(f);
    PolyCost cost;
    cost.Q = Matrix::Identity(1, 1);
    cost.R = Matrix::Identity(1, 1);
    ValueFunction value = synthesize(dyn, cost, 3);
    const double r_small = std::abs(hjb_residual(dyn, cost, value, Vector::Constant(1, 0.01)));
    const double r_large = std::abs(hjb_residual(dyn, cost, value, Vector::Constant(1, 0.1)));
    CHECK(r_small <= 1e-7);
    CHECK(r_large / r_small == Catch::Approx(1e4).epsilon(0.2));  // slope 4 on log-log
}

TEST_CASE("synthesized value functions are positive near the origin", "[control]") {
    std::mt19937 rng(353);
    PolyDynamics dyn;
    dyn.n = 3;
    dyn.m = 1;
    dyn.A = oracle::random_matrix(3, 3, rng);
    dyn.B = oracle::random_matrix(3, 1, rng);
    dyn.F[2] = oracle::random_matrix(3, 9, rng, 0.3).sparseView();
    PolyCost cost;
    cost.Q = Matrix::Identity(3, 3);
    cost.R = Matrix::Identity(1, 1);
    ValueFunction value = synthesize(dyn, cost, 4);
    for (int trial = 0; trial < 100; ++trial) {
        Vector x = oracle::random_vector(3, rng);
        x *= 1e-3 / x.norm();
        CHECK(eval_value(value, x) > 0.0);
    }
}

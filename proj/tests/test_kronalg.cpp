#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ppr/kronalg.hpp"
#include "support/oracles.hpp"

using namespace ppr;

TEST_CASE("kron_power matches the definition", "[kronalg]") {
    Vector x2(2);
    x2 << 1.0, 2.0;
    KronVector p2 = kron_power(x2, 2);
    REQUIRE(p2.size() == 4);
    CHECK(p2.data[0] == 1.0);
    CHECK(p2.data[1] == 2.0);
    CHECK(p2.data[2] == 2.0);
    CHECK(p2.data[3] == 4.0);

    Vector x1(1);
    x1 << 3.0;
    CHECK(kron_power(x1, 4).data[0] == 81.0);

    // multi-index (i,j,l) entry is x_i x_j x_l
    Vector x3(3);
    x3 << 1.0, 0.0, -1.0;
    KronVector p3 = kron_power(x3, 3);
    CHECK(p3.data[0] == 1.0);                    // (1,1,1)
    CHECK(p3.data[2 * 9 + 2 * 3 + 2] == -1.0);   // (3,3,3)
    CHECK(p3.data[0 * 9 + 1 * 3 + 0] == 0.0);    // contains index 2
}

TEST_CASE("kron_power edge orders", "[kronalg]") {
    Vector x(3);
    x << 4.0, 5.0, 6.0;
    KronVector p0 = kron_power(x, 0);
    REQUIRE(p0.size() == 1);
    CHECK(p0.data[0] == 1.0);
    CHECK(p0.k == 0);

    Vector empty(0);
    CHECK(kron_power(empty, 2).size() == 0);
}

TEST_CASE("kron_power entries at random multi-indices", "[kronalg]") {
    std::mt19937 rng(7);
    const Index n = 4;
    const int k = 4;
    Vector x = oracle::random_vector(n, rng);
    KronVector p = kron_power(x, k);
    std::uniform_int_distribution<Index> pick(0, p.size() - 1);
    for (int trial = 0; trial < 50; ++trial) {
        Index idx = pick(rng);
        double expect = 1.0;
        Index rem = idx;
        for (int s = 0; s < k; ++s) {
            expect *= x[rem % n];
            rem /= n;
        }
        CHECK(p.data[idx] == Catch::Approx(expect).margin(1e-14));
    }
}

TEST_CASE("apply_shuffle transposes the reshape", "[kronalg]") {
    Vector v(4);
    v << 1.0, 3.0, 2.0, 4.0;  // vec([[1,2],[3,4]])
    Vector s = apply_shuffle({2, 2}, v);
    Vector expect(4);
    expect << 1.0, 2.0, 3.0, 4.0;
    CHECK((s - expect).norm() == 0.0);
}

TEST_CASE("apply_shuffle with q = 1 is the identity", "[kronalg]") {
    std::mt19937 rng(11);
    Vector v = oracle::random_vector(7, rng);
    CHECK((apply_shuffle({1, 7}, v) - v).norm() == 0.0);
}

TEST_CASE("apply_shuffle equals the explicit permutation matrix", "[kronalg]") {
    std::mt19937 rng(13);
    const Index p = 2, q = 3;
    Vector v = oracle::random_vector(p * q, rng);
    Matrix s = oracle::dense_shuffle(q, p);
    CHECK((apply_shuffle({q, p}, v) - s * v).norm() <= 1e-15);
}

TEST_CASE("shuffle round-trip is the identity", "[kronalg]") {
    std::mt19937 rng(17);
    for (auto [p, q] : {std::pair<Index, Index>{2, 3}, {4, 5}, {1, 6}, {3, 3}}) {
        Vector v = oracle::random_vector(p * q, rng);
        Vector round = apply_shuffle({static_cast<Index>(p), static_cast<Index>(q)},
                                     apply_shuffle({static_cast<Index>(q), static_cast<Index>(p)}, v));
        CHECK((round - v).norm() == 0.0);
    }
}

TEST_CASE("apply_shuffle rejects length mismatch", "[kronalg]") {
    Vector v(5);
    v.setZero();
    CHECK_THROWS_AS(apply_shuffle({2, 3}, v), DimensionError);
}

TEST_CASE("mixed-product identity", "[kronalg]") {
    std::mt19937 rng(19);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix a = oracle::random_matrix(2, 3, rng);
        Matrix b = oracle::random_matrix(3, 2, rng);
        Matrix d = oracle::random_matrix(3, 2, rng);
        Matrix g = oracle::random_matrix(2, 3, rng);
        Matrix lhs = oracle::dense_kron(a, b) * oracle::dense_kron(d, g);
        Matrix rhs = oracle::dense_kron(a * d, b * g);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("symmetrize on a 2x2 matrix coefficient", "[kronalg]") {
    Vector v(4);
    v << 0.0, 0.0, 1.0, 0.0;  // vec([[0,1],[0,0]])
    KronVector s = symmetrize(KronVector(v, 2, 2));
    Vector expect(4);
    expect << 0.0, 0.5, 0.5, 0.0;
    CHECK((s.data - expect).norm() <= 1e-15);
}

TEST_CASE("symmetrize is a bit-exact fixed point on symmetric input", "[kronalg]") {
    std::mt19937 rng(23);
    KronVector v(oracle::random_vector(27, rng), 3, 3);
    KronVector s1 = symmetrize(v);
    KronVector s2 = symmetrize(s1);
    CHECK((s1.data - s2.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("symmetrize distributes a single entry over its orbit", "[kronalg]") {
    Vector v = Vector::Zero(8);
    v[1] = 1.0;  // multi-index (1,1,2) in 1-based digits
    KronVector s = symmetrize(KronVector(v, 2, 3));
    CHECK(s.data[1] == Catch::Approx(1.0 / 3.0));
    CHECK(s.data[2] == Catch::Approx(1.0 / 3.0));  // (1,2,1)
    CHECK(s.data[4] == Catch::Approx(1.0 / 3.0));  // (2,1,1)
    CHECK(s.data[0] == 0.0);
    CHECK(s.data[7] == 0.0);
}

TEST_CASE("symmetrize preserves the polynomial", "[kronalg]") {
    std::mt19937 rng(29);
    const Index n = 3;
    const int k = 4;
    KronVector v(oracle::random_vector(kron_length(n, k), rng), n, k);
    KronVector s = symmetrize(v);
    for (int trial = 0; trial < 100; ++trial) {
        Vector x = oracle::random_vector(n, rng);
        KronVector xp = kron_power(x, k);
        const double a = v.data.dot(xp.data);
        const double b = s.data.dot(xp.data);
        CHECK(std::abs(a - b) <= 1e-12 * v.data.norm() * std::pow(x.norm(), k));
    }
}

TEST_CASE("symmetrize matches full permutation averaging", "[kronalg]") {
    std::mt19937 rng(31);
    const Index n = 2;
    const int k = 4;
    KronVector v(oracle::random_vector(kron_length(n, k), rng), n, k);
    CHECK((symmetrize(v).data - oracle::permutation_average(v.data, n, k)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("check_symmetric accepts symmetrized output and rejects asymmetry", "[kronalg]") {
    std::mt19937 rng(37);
    KronVector v(oracle::random_vector(kron_length(3, 3), rng), 3, 3);
    CHECK(check_symmetric(symmetrize(v), 1e-14));

    Vector w(4);
    w << 0.0, 0.0, 1.0, 0.0;
    CHECK_FALSE(check_symmetric(KronVector(w, 2, 2), 1e-14));

    Matrix sym = oracle::random_matrix(4, 4, rng);
    sym = Matrix(0.5 * (sym + sym.transpose()));
    CHECK(check_symmetric(KronVector(oracle::vec(sym), 4, 2), 1e-14));
}

TEST_CASE("apply_kway_lyapunov_transpose scalar case", "[kronalg]") {
    Matrix a(1, 1);
    a << -3.0;
    for (int k = 1; k <= 5; ++k) {
        KronVector v(Vector::Constant(1, 2.0), 1, k);
        KronVector out = apply_kway_lyapunov_transpose(a, k, v);
        CHECK(out.data[0] == Catch::Approx(k * -3.0 * 2.0));
    }
}

TEST_CASE("apply_kway_lyapunov_transpose order 2 is the Lyapunov operator", "[kronalg]") {
    std::mt19937 rng(41);
    const Index n = 4;
    Matrix a = oracle::random_matrix(n, n, rng);
    KronVector v(oracle::random_vector(n * n, rng), n, 2);
    Matrix vm = Eigen::Map<const Matrix>(v.data.data(), n, n);
    Matrix expect = a.transpose() * vm + vm * a;
    KronVector out = apply_kway_lyapunov_transpose(a, 2, v);
    CHECK((out.data - oracle::vec(expect)).norm() <= 1e-12 * expect.norm());
}

TEST_CASE("apply_kway_lyapunov_transpose matches the dense Kronecker sum", "[kronalg]") {
    std::mt19937 rng(43);
    for (Index n : {1, 2, 3}) {
        for (int k : {2, 3, 4}) {
            Matrix a = oracle::random_matrix(n, n, rng);
            KronVector v(oracle::random_vector(kron_length(n, k), rng), n, k);
            Matrix dense = oracle::dense_kway_lyapunov(a, k).transpose();
            Vector expect = dense * v.data;
            KronVector out = apply_kway_lyapunov_transpose(a, k, v);
            CHECK((out.data - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
        }
    }
}

TEST_CASE("apply_kway_lyapunov_transpose rejects mismatched orders", "[kronalg]") {
    Matrix a = Matrix::Identity(2, 2);
    KronVector v(Vector::Zero(4), 2, 2);
    CHECK_THROWS_AS(apply_kway_lyapunov_transpose(a, 3, v), DimensionError);
}

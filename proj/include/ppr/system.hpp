#pragma once

// Polynomial control-affine system
//   xdot = A x + sum_p F_p x^(x)p  +  (B + sum_p G_p (x^(x)p (x) I_m)) u
// and the running cost
//   1/2 (x^T Q x + u^T R u + sum_p q_p^T x^(x)p).
//
// F_p / G_p / q_p are stored sparse-by-coordinate against the global
// multi-index convention; dense inputs are ingested through the same path.

#include <map>
#include <vector>

#include "ppr/kronalg.hpp"
#include "ppr/types.hpp"

namespace ppr {

namespace detail {

// Product of x over the base-n digits of the column index, optionally
// skipping one digit position (used by the analytic Jacobians).
template <class Scalar>
Scalar digit_product(Index col, int p, Index n, const VectorX<Scalar>& x) {
    Scalar prod = Scalar(1);
    for (int s = 0; s < p; ++s) {
        prod *= x[col % n];
        col /= n;
    }
    return prod;
}

template <class Scalar>
VectorX<Scalar> real_mat_vec(const Eigen::Ref<const Matrix>& a, const VectorX<Scalar>& x) {
    if constexpr (std::is_same_v<Scalar, double>) {
        return a * x;
    } else {
        VectorX<Scalar> out = VectorX<Scalar>::Zero(a.rows());
        for (Index c = 0; c < a.cols(); ++c)
            for (Index r = 0; r < a.rows(); ++r) out[r] += a(r, c) * x[c];
        return out;
    }
}

template <class Scalar>
Scalar real_dot(const Vector& v, const VectorX<Scalar>& x) {
    Scalar acc = Scalar(0);
    for (Index i = 0; i < v.size(); ++i) acc += v[i] * x[i];
    return acc;
}

}  // namespace detail

struct PolyDynamics {
    Index n = 0;                    // state dimension
    Index m = 0;                    // input dimension
    Matrix A;                       // n x n
    Matrix B;                       // n x m
    std::map<int, SparseMatrix> F;  // p >= 2 -> n x n^p
    std::map<int, SparseMatrix> G;  // p >= 1 -> n x m*n^p

    int drift_degree() const { return F.empty() ? 1 : F.rbegin()->first; }
    int input_degree() const { return G.empty() ? 0 : G.rbegin()->first; }
    /// Highest polynomial degree appearing in the system coefficients.
    int ell() const { return std::max({1, drift_degree(), input_degree()}); }

    void validate() const {
        if (n < 1 || m < 1) throw ModelError("dynamics: need n >= 1 and m >= 1");
        if (A.rows() != n || A.cols() != n) throw ModelError("dynamics: A must be n x n");
        if (B.rows() != n || B.cols() != m) throw ModelError("dynamics: B must be n x m");
        for (const auto& [p, f] : F) {
            if (p < 2) throw ModelError("dynamics: F_p requires p >= 2");
            if (f.rows() != n || f.cols() != kron_length(n, p))
                throw ModelError("dynamics: F_" + std::to_string(p) + " must be n x n^p");
        }
        for (const auto& [p, g] : G) {
            if (p < 1) throw ModelError("dynamics: G_p requires p >= 1");
            if (g.rows() != n || g.cols() != m * kron_length(n, p))
                throw ModelError("dynamics: G_" + std::to_string(p) + " must be n x m*n^p");
        }
    }

    /// f(x) = A x + sum_p F_p x^(x)p, evaluated from coordinates (no n^p
    /// intermediates).
    template <class Scalar>
    VectorX<Scalar> drift(const VectorX<Scalar>& x) const {
        VectorX<Scalar> out = detail::real_mat_vec<Scalar>(A, x);
        for (const auto& [p, f] : F)
            for (Index c = 0; c < f.outerSize(); ++c)
                for (SparseMatrix::InnerIterator it(f, c); it; ++it)
                    out[it.row()] += it.value() * detail::digit_product(c, p, n, x);
        return out;
    }

    /// g(x) = B + sum_p G_p (x^(x)p (x) I_m), an n x m matrix.
    template <class Scalar>
    MatrixX<Scalar> input_map(const VectorX<Scalar>& x) const {
        MatrixX<Scalar> out(n, m);
        for (Index c = 0; c < m; ++c)
            for (Index r = 0; r < n; ++r) out(r, c) = B(r, c);
        for (const auto& [p, g] : G)
            for (Index c = 0; c < g.outerSize(); ++c)
                for (SparseMatrix::InnerIterator it(g, c); it; ++it)
                    out(it.row(), c % m) += it.value() * detail::digit_product(c / m, p, n, x);
        return out;
    }

    /// d f / d x.
    Matrix drift_jacobian(const Vector& x) const {
        Matrix jac = A;
        std::vector<Index> digits;
        for (const auto& [p, f] : F) {
            digits.resize(p);
            for (Index c = 0; c < f.outerSize(); ++c) {
                for (SparseMatrix::InnerIterator it(f, c); it; ++it) {
                    Index col = c;
                    for (int s = p - 1; s >= 0; --s) {
                        digits[s] = col % n;
                        col /= n;
                    }
                    for (int s = 0; s < p; ++s) {
                        double prod = it.value();
                        for (int t = 0; t < p; ++t)
                            if (t != s) prod *= x[digits[t]];
                        jac(it.row(), digits[s]) += prod;
                    }
                }
            }
        }
        return jac;
    }

    /// d/dx [ g(x) u ] holding u fixed.
    Matrix input_term_jacobian(const Vector& x, const Vector& u) const {
        Matrix jac = Matrix::Zero(n, n);
        std::vector<Index> digits;
        for (const auto& [p, g] : G) {
            digits.resize(p);
            for (Index c = 0; c < g.outerSize(); ++c) {
                const double uval = u[c % m];
                if (uval == 0.0) continue;
                Index col = c / m;
                for (int s = p - 1; s >= 0; --s) {
                    digits[s] = col % n;
                    col /= n;
                }
                for (SparseMatrix::InnerIterator it(g, c); it; ++it) {
                    for (int s = 0; s < p; ++s) {
                        double prod = it.value() * uval;
                        for (int t = 0; t < p; ++t)
                            if (t != s) prod *= x[digits[t]];
                        jac(it.row(), digits[s]) += prod;
                    }
                }
            }
        }
        return jac;
    }
};

struct PolyCost {
    Matrix Q;                  // n x n, symmetric PSD
    Matrix R;                  // m x m, symmetric PD
    std::map<int, Vector> q;   // p >= 3 -> length n^p, stored symmetric

    int max_state_degree() const { return q.empty() ? 2 : q.rbegin()->first; }

    /// Symmetrizes q_p on ingestion so downstream results are independent of
    /// the caller's coefficient ordering.
    void add_state_term(int p, Vector coeff, Index n) {
        if (p < 3) throw ModelError("cost: q_p requires p >= 3");
        if (coeff.size() != kron_length(n, p))
            throw ModelError("cost: q_" + std::to_string(p) + " has length " +
                             std::to_string(coeff.size()) + ", expected n^p");
        symmetrize_inplace(coeff, n, p);
        q[p] = std::move(coeff);
    }

    void validate(Index n, Index m) const {
        if (Q.rows() != n || Q.cols() != n) throw ModelError("cost: Q must be n x n");
        if (R.rows() != m || R.cols() != m) throw ModelError("cost: R must be m x m");
        const double qs = std::max(1.0, Q.norm());
        if ((Q - Q.transpose()).norm() > 1e-12 * qs) throw ModelError("cost: Q must be symmetric");
        if ((R - R.transpose()).norm() > 1e-12 * std::max(1.0, R.norm()))
            throw ModelError("cost: R must be symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> qe(Q, Eigen::EigenvaluesOnly);
        if (qe.eigenvalues().minCoeff() < -1e-10 * qs) throw ModelError("cost: Q must be positive semidefinite");
        Eigen::SelfAdjointEigenSolver<Matrix> re(R, Eigen::EigenvaluesOnly);
        if (re.eigenvalues().minCoeff() <= 0.0) throw ModelError("cost: R must be positive definite");
        for (const auto& [p, qp] : q)
            if (qp.size() != kron_length(n, p))
                throw ModelError("cost: q_" + std::to_string(p) + " has wrong length");
    }

    Matrix r_inverse() const {
        return R.ldlt().solve(Matrix::Identity(R.rows(), R.cols()));
    }

    /// x^T Q x + sum_p q_p^T x^(x)p  (no 1/2 factor).
    template <class Scalar>
    Scalar state_penalty(const VectorX<Scalar>& x) const {
        VectorX<Scalar> qx = detail::real_mat_vec<Scalar>(Q, x);
        Scalar acc = Scalar(0);
        for (Index i = 0; i < x.size(); ++i) acc += x[i] * qx[i];
        if (!q.empty()) {
            VectorX<Scalar> xp = kron_power_gen<Scalar>(x, 2);
            int have = 2;
            for (const auto& [p, qp] : q) {
                for (; have < p; ++have) {
                    VectorX<Scalar> next(xp.size() * x.size());
                    for (Index a = 0; a < xp.size(); ++a) next.segment(a * x.size(), x.size()) = xp[a] * x;
                    xp.swap(next);
                }
                acc += detail::real_dot(qp, xp);
            }
        }
        return acc;
    }

    /// Running-cost integrand 1/2 (x^T Q x + u^T R u + sum_p q_p^T x^(x)p).
    double integrand(const Vector& x, const Vector& u) const {
        return 0.5 * (state_penalty<double>(x) + u.dot(R * u));
    }
};

}  // namespace ppr

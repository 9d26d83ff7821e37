#pragma once

// Polynomial feedback law u(x) = K^[1] x + K^[2] x^(x)2 + ... extracted from
// a value function: each degree collects the (input-map, value-coefficient)
// pairs contributing to -R^-1 g(x)^T dV/dx at that order.

#include <vector>

#include "ppr/synthesis.hpp"
#include "ppr/system.hpp"

namespace ppr {

struct PolyController {
    Index n = 0;
    Index m = 0;
    std::vector<Matrix> gains;  // gains[j-1] = K^[j], m x n^j

    int degree() const { return static_cast<int>(gains.size()); }

    const Matrix& gain(int j) const {
        if (j < 1 || j > degree()) throw DimensionError("PolyController: no gain of degree " + std::to_string(j));
        return gains[static_cast<size_t>(j) - 1];
    }

    void validate() const {
        for (int j = 1; j <= degree(); ++j)
            if (gain(j).rows() != m || gain(j).cols() != kron_length(n, j))
                throw DimensionError("PolyController: K^[" + std::to_string(j) + "] has wrong shape");
    }

    /// u(x) = sum_j K^[j] x^(x)j, with incremental Kronecker powers.
    template <class Scalar>
    VectorX<Scalar> evaluate(const VectorX<Scalar>& x) const {
        if (x.size() != n) throw DimensionError("PolyController::evaluate: state dimension mismatch");
        VectorX<Scalar> out = VectorX<Scalar>::Zero(m);
        VectorX<Scalar> xp = VectorX<Scalar>::Ones(1);
        for (int j = 1; j <= degree(); ++j) {
            VectorX<Scalar> next(xp.size() * n);
            for (Index a = 0; a < xp.size(); ++a) next.segment(a * n, n) = xp[a] * x;
            xp.swap(next);
            const Matrix& k = gains[static_cast<size_t>(j) - 1];
            if constexpr (std::is_same_v<Scalar, double>) {
                out.noalias() += k * xp;
            } else {
                for (Index c = 0; c < k.cols(); ++c)
                    for (Index r = 0; r < m; ++r) out[r] += k(r, c) * xp[c];
            }
        }
        return out;
    }

    Vector operator()(const Vector& x) const { return evaluate<double>(x); }

    /// du/dx, by contracting each gain against x in all modes but one.
    Matrix jacobian(const Vector& x) const {
        Matrix jac = Matrix::Zero(m, n);
        for (int j = 1; j <= degree(); ++j) {
            for (int slot = 0; slot < j; ++slot) {
                Matrix z = gains[static_cast<size_t>(j) - 1];
                for (int t = j - 1; t > slot; --t) {  // contract trailing digits
                    const Index cols = kron_length(n, t);
                    Matrix next(m, cols);
                    for (Index c = 0; c < cols; ++c) next.col(c) = z.middleCols(c * n, n) * x;
                    z.swap(next);
                }
                for (int t = 0; t < slot; ++t) {  // contract leading digits
                    const Index cols = z.cols() / n;
                    Matrix next = Matrix::Zero(m, cols);
                    for (Index f = 0; f < n; ++f) next += x[f] * z.middleCols(f * cols, cols);
                    z.swap(next);
                }
                jac += z;
            }
        }
        return jac;
    }
};

/// V(x).
inline double eval_value(const ValueFunction& value, const Vector& x) { return value.evaluate<double>(x); }

/// dV/dx as a column vector.
inline Vector eval_value_gradient(const ValueFunction& value, const Vector& x) {
    return value.gradient<double>(x);
}

/// u(x).
inline Vector eval_controller(const PolyController& ctrl, const Vector& x) { return ctrl.evaluate<double>(x); }

/// Collects the degree-j terms of -R^-1 g(x)^T dV/dx for j = 1..d-1.
/// Degree j receives the B-pairing with v_{j+1} and every (G_p, v_i) pairing
/// with p+i-1 = j; gain coefficient blocks are stored symmetrized per row.
inline PolyController extract_gains(const ValueFunction& value, const PolyDynamics& dyn, const Matrix& r) {
    value.validate();
    if (value.n != dyn.n) throw DimensionError("extract_gains: state dimension mismatch");
    const Index n = dyn.n;
    const Index m = dyn.m;
    const Matrix r_inv = r.ldlt().solve(Matrix::Identity(m, m));

    PolyController ctrl;
    ctrl.n = n;
    ctrl.m = m;
    for (int j = 1; j <= value.degree - 1; ++j) {
        Matrix kj = Matrix::Zero(m, kron_length(n, j));
        const int i_b = j + 1;  // B pairing
        if (i_b >= 2 && i_b <= value.degree)
            kj.noalias() -= (0.5 * i_b) * r_inv * (dyn.B.transpose() * value.matricization(i_b));
        for (const auto& [p, gp] : dyn.G) {
            const int i = j + 1 - p;
            if (i < 2 || i > value.degree) continue;
            // w(alpha, t*n^(i-1)+u) = (G_p^T V_i)[(t m + alpha), u]
            const Matrix raw = gp.transpose() * value.matricization(i);  // m n^p x n^(i-1)
            const Index np = kron_length(n, p);
            const Index li = kron_length(n, i - 1);
            Matrix w(m, np * li);
            for (Index t = 0; t < np; ++t)
                for (Index a = 0; a < m; ++a) w.row(a).segment(t * li, li) = raw.row(t * m + a);
            kj.noalias() -= (0.5 * i) * r_inv * w;
        }
        for (Index row = 0; row < m; ++row) {
            Vector coeff = kj.row(row).transpose();
            symmetrize_inplace(coeff, n, j);
            kj.row(row) = coeff.transpose();
        }
        ctrl.gains.push_back(std::move(kj));
    }
    return ctrl;
}

/// Pointwise HJB residual at x; dispatches to the shared evaluator.
inline double hjb_residual(const PolyDynamics& dyn, const PolyCost& cost, const ValueFunction& value,
                           const Vector& x) {
    return hjb_residual_at<double>(dyn, cost, value, x);
}

}  // namespace ppr

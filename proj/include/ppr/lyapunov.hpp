#pragma once

// Algebraic Riccati solve (Newton-Kleinman on Lyapunov steps, Hamiltonian
// eigenvector fallback) and the k-way Lyapunov-structured linear systems
//   L_k(Acl)^T v = b
// solved on the complex Schur form of Acl without materializing n^k x n^k
// matrices.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "ppr/kronalg.hpp"
#include "ppr/types.hpp"

namespace ppr {

struct AreSolution {
    Matrix V2;             // symmetric PSD stabilizing solution
    Matrix Acl;            // A - B R^-1 B^T V2, Hurwitz
    double residual_norm;  // Frobenius norm of the ARE residual
};

namespace detail {

inline double spectral_abscissa(const Matrix& a) {
    return Eigen::EigenSolver<Matrix>(a, false).eigenvalues().real().maxCoeff();
}

// Back-substitution for (sum_s I(x)..S..(x)I) w = c with S upper triangular.
// Indices are processed in decreasing linear order; every off-diagonal
// reference has one digit increased, hence is already solved.
inline void kway_triangular_backsub(const ComplexMatrix& s_tri, int k, Index n, ComplexVector& w) {
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> s_row = s_tri;
    std::vector<Index> digits(k, n - 1);
    std::vector<Index> stride(k);
    stride[k - 1] = 1;
    for (int s = k - 2; s >= 0; --s) stride[s] = stride[s + 1] * n;
    for (Index i = w.size() - 1; i >= 0; --i) {
        std::complex<double> diag = 0.0;
        std::complex<double> acc = w[i];
        for (int s = 0; s < k; ++s) {
            const Index d = digits[s];
            diag += s_row(d, d);
            const Index str = stride[s];
            const std::complex<double>* row = s_row.data() + d * n;
            for (Index j = d + 1; j < n; ++j) acc -= row[j] * w[i + (j - d) * str];
        }
        w[i] = acc / diag;
        for (int s = k - 1; s >= 0; --s) {  // decrement base-n odometer
            if (digits[s] > 0) {
                --digits[s];
                break;
            }
            digits[s] = n - 1;
        }
    }
}

}  // namespace detail

// Factors Acl^T = Z S Z^H once; each order-k solve is k mode transforms, a
// triangular back-substitution, and k inverse transforms: O(k n^(k+1)) work.
class KwayLyapunovSolver {
  public:
    struct SolveInfo {
        double rel_residual = 0.0;  // ||L_k^T v - b|| / ||b||
        double imag_ratio = 0.0;    // discarded imaginary mass / result norm
        int refinements = 0;
    };

    explicit KwayLyapunovSolver(const Matrix& acl, double abscissa_margin = 1e-10)
        : acl_(acl), n_(acl.rows()) {
        if (acl.rows() != acl.cols()) throw DimensionError("KwayLyapunovSolver: Acl not square");
        Eigen::ComplexSchur<ComplexMatrix> schur(acl.transpose().cast<std::complex<double>>());
        if (schur.info() != Eigen::Success) throw SynthesisError("Schur decomposition failed");
        z_ = schur.matrixU();
        s_ = schur.matrixT();
        abscissa_ = s_.diagonal().real().maxCoeff();
        if (abscissa_ >= -abscissa_margin) {
            std::ostringstream msg;
            msg << "closed-loop matrix is not Hurwitz (spectral abscissa " << abscissa_
                << "): the degree-k systems are singular";
            throw SynthesisError(msg.str());
        }
    }

    double spectral_abscissa() const { return abscissa_; }
    const Matrix& acl() const { return acl_; }

    /// Solves L_k(Acl)^T v = b. The discarded imaginary mass is recorded;
    /// correctness is gated on the residual against the real operator,
    /// which subsumes it.
    Vector solve(int k, const Vector& b, SolveInfo* info = nullptr, double rel_tol = 1e-10) const {
        if (k < 1) throw DimensionError("solve_kway: order must be >= 1");
        if (b.size() != kron_length(n_, k)) throw DimensionError("solve_kway: rhs length != n^k");
        const double bnorm = b.norm();
        SolveInfo local;
        Vector v = solve_once(k, b, local.imag_ratio);
        double resid = residual(k, v, b);
        while (bnorm > 0.0 && resid > 1e-15 * bnorm && local.refinements < 3) {
            // residual-correction pass on the same factorization
            Vector r = b - apply_kway_lyapunov_transpose(acl_, k, KronVector(v, n_, k)).data;
            double imag2 = 0.0;
            Vector correction = solve_once(k, r, imag2);
            const double new_resid = residual(k, Vector(v + correction), b);
            if (new_resid >= resid) break;
            v += correction;
            resid = new_resid;
            ++local.refinements;
        }
        local.rel_residual = bnorm > 0.0 ? resid / bnorm : resid;
        if (info) *info = local;
        if (bnorm > 0.0 && local.rel_residual > rel_tol) {
            std::ostringstream msg;
            msg << "k-way solve did not reach tolerance: relative residual " << local.rel_residual
                << " > " << rel_tol << " at order " << k << " (discarded imaginary ratio "
                << local.imag_ratio << ")";
            throw SynthesisError(msg.str());
        }
        return v;
    }

  private:
    double residual(int k, const Vector& v, const Vector& b) const {
        return (apply_kway_lyapunov_transpose(acl_, k, KronVector(v, n_, k)).data - b).norm();
    }

    Vector solve_once(int k, const Vector& b, double& imag_ratio) const {
        // v = Z^(x)k w with (sum_s mode_s(S)) w = (Z^H)^(x)k b; contract_mode
        // multiplies mode s by W^T, so pass conj(Z) and Z^T respectively.
        ComplexVector w = b.cast<std::complex<double>>();
        const ComplexMatrix zc = z_.conjugate();
        for (int s = 0; s < k; ++s) w = detail::contract_mode(zc, w, n_, k, s);
        detail::kway_triangular_backsub(s_, k, n_, w);
        const ComplexMatrix zt = z_.transpose();
        for (int s = 0; s < k; ++s) w = detail::contract_mode(zt, w, n_, k, s);
        const double wnorm = w.norm();
        imag_ratio = wnorm > 0.0 ? w.imag().norm() / wnorm : 0.0;
        return w.real();
    }

    Matrix acl_;
    Index n_;
    ComplexMatrix z_, s_;
    double abscissa_ = 0.0;
};

/// Solves L_k(Acl)^T v = b for Hurwitz Acl (one-shot convenience wrapper).
inline KronVector solve_kway(const Matrix& acl, int k, const KronVector& b) {
    if (b.n != acl.rows() || b.k != k) throw DimensionError("solve_kway: rhs order/dimension mismatch");
    KwayLyapunovSolver solver(acl);
    return KronVector(solver.solve(k, b.data), b.n, k);
}

namespace detail {

// Lyapunov solve M^T X + X M = W for Hurwitz M, via the k=2 path.
inline Matrix lyapunov_solve(const KwayLyapunovSolver& solver, const Matrix& w) {
    const Index n = w.rows();
    Vector rhs = Eigen::Map<const Vector>(w.data(), n * n);
    Vector x = solver.solve(2, rhs);
    Matrix xm = Eigen::Map<const Matrix>(x.data(), n, n);
    return 0.5 * (xm + xm.transpose());
}

inline void require_symmetric(const Matrix& m, const char* name) {
    const double scale = std::max(1.0, m.norm());
    if ((m - m.transpose()).norm() > 1e-10 * scale)
        throw SynthesisError(std::string(name) + " must be symmetric");
}

// Bass's eigenvalue-shifting construction of an initial stabilizing gain:
// solve (A+beta I)X + X(A+beta I)^T = 2 B B^T with beta beyond the spectral
// abscissa; K = B^T X^-1 stabilizes when X is invertible.
inline bool bass_initial_gain(const Matrix& a, const Matrix& b, Matrix& k_out) {
    const Index n = a.rows();
    const double beta = std::max(0.0, -Eigen::EigenSolver<Matrix>(a, false).eigenvalues().real().minCoeff()) +
                        0.5 * a.norm() + 1.0;
    const Matrix shifted = -(a + beta * Matrix::Identity(n, n)).transpose();
    if (detail::spectral_abscissa(shifted) >= 0.0) return false;
    KwayLyapunovSolver solver(shifted);
    Matrix x = lyapunov_solve(solver, -2.0 * b * b.transpose());
    Eigen::FullPivLU<Matrix> lu(x);
    if (!lu.isInvertible()) return false;
    k_out = b.transpose() * lu.inverse();
    return detail::spectral_abscissa(a - b * k_out) < 0.0;
}

// Stabilizing solution from the stable invariant subspace of the
// Hamiltonian; used to (re)start Newton when eigenvalue shifting fails.
inline Matrix hamiltonian_stabilizing_solution(const Matrix& a, const Matrix& b, const Matrix& q,
                                               const Matrix& r_inv_bt) {
    const Index n = a.rows();
    Matrix ham(2 * n, 2 * n);
    ham << a, -b * r_inv_bt, -q, -a.transpose();
    Eigen::ComplexEigenSolver<ComplexMatrix> eig(ham.cast<std::complex<double>>());
    if (eig.info() != Eigen::Success) throw SynthesisError("Hamiltonian eigendecomposition failed");
    ComplexMatrix basis(2 * n, n);
    Index count = 0;
    for (Index i = 0; i < 2 * n; ++i) {
        if (eig.eigenvalues()[i].real() < 0.0) {
            if (count == n) throw SynthesisError("Hamiltonian has more than n stable eigenvalues");
            basis.col(count++) = eig.eigenvectors().col(i);
        }
    }
    if (count != n)
        throw SynthesisError(
            "algebraic Riccati equation has no stabilizing solution: the pair (A,B) is not "
            "stabilizable or (A,Q) hides unstable unobservable modes (Al'brekht's assumptions fail)");
    const ComplexMatrix x1 = basis.topRows(n);
    const ComplexMatrix x2 = basis.bottomRows(n);
    Eigen::FullPivLU<ComplexMatrix> lu(x1);
    if (!lu.isInvertible()) throw SynthesisError("Hamiltonian stable subspace is not a graph over the state");
    Matrix v2 = (x2 * lu.inverse()).real();
    return 0.5 * (v2 + v2.transpose());
}

}  // namespace detail

/// Stabilizing solution of A^T V2 + V2 A - V2 B R^-1 B^T V2 + Q = 0.
/// Newton-Kleinman iteration, each step one Lyapunov solve on the current
/// closed loop; falls back to the Hamiltonian method if Newton cannot start
/// or stalls.
inline AreSolution solve_are(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                             double tol = 1e-10) {
    const Index n = a.rows();
    if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n)
        throw DimensionError("solve_are: inconsistent state dimensions");
    if (r.rows() != r.cols() || r.rows() != b.cols()) throw DimensionError("solve_are: R must be m x m");
    detail::require_symmetric(q, "Q");
    detail::require_symmetric(r, "R");
    Eigen::SelfAdjointEigenSolver<Matrix> r_eig(r);
    if (r_eig.eigenvalues().minCoeff() <= 0.0)
        throw SynthesisError("R is not positive definite: the LQR problem underlying Al'brekht's method is ill-posed");
    Eigen::SelfAdjointEigenSolver<Matrix> q_eig(q);
    if (q_eig.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, q.norm()))
        throw SynthesisError("Q is not positive semidefinite");

    const Matrix r_inv_bt = r.ldlt().solve(b.transpose());
    auto are_residual = [&](const Matrix& p) {
        return (a.transpose() * p + p * a - (p * b) * (r_inv_bt * p) + q).norm();
    };
    // achievable residual floor scales with the size of the terms that
    // cancel, not just with Q
    auto residual_scale = [&](const Matrix& p) {
        return std::max({1.0, q.norm(), (a.transpose() * p).norm(), ((p * b) * (r_inv_bt * p)).norm()});
    };

    // initial stabilizing gain
    Matrix k = Matrix::Zero(b.cols(), n);
    bool have_gain = detail::spectral_abscissa(a) < 0.0;
    if (!have_gain) have_gain = detail::bass_initial_gain(a, b, k);
    if (!have_gain) {
        Matrix p = detail::hamiltonian_stabilizing_solution(a, b, q, r_inv_bt);
        k = r_inv_bt * p;
        if (detail::spectral_abscissa(a - b * k) >= 0.0)
            throw SynthesisError(
                "no stabilizing solution found: (A,B) appears non-stabilizable (the Riccati "
                "assumption of Al'brekht's method is violated)");
    }

    // Newton runs to its numerical floor; tol is only the final gate.
    Matrix best_p = Matrix::Zero(n, n);
    double best_res = std::numeric_limits<double>::infinity();
    bool fell_back = false;
    for (int iter = 0; iter < 60; ++iter) {
        const Matrix acl = a - b * k;
        if (detail::spectral_abscissa(acl) >= 0.0) {
            if (fell_back) throw SynthesisError("Newton iterate lost stability after Hamiltonian restart");
            k = r_inv_bt * detail::hamiltonian_stabilizing_solution(a, b, q, r_inv_bt);
            fell_back = true;
            continue;
        }
        KwayLyapunovSolver solver(acl);
        const Matrix p = detail::lyapunov_solve(solver, -(q + k.transpose() * r * k));
        k = r_inv_bt * p;
        const double res = are_residual(p);
        if (res < best_res) {
            best_res = res;
            best_p = p;
        }
        if (res <= 1e-16 * residual_scale(p)) break;
        if (iter > 4 && res > 0.5 * best_res) {
            if (best_res <= tol * residual_scale(best_p)) break;  // stalled at an acceptable floor
            if (!fell_back) {
                k = r_inv_bt * detail::hamiltonian_stabilizing_solution(a, b, q, r_inv_bt);
                fell_back = true;
                best_res = std::numeric_limits<double>::infinity();
                continue;
            }
            break;
        }
    }
    const Matrix p = best_p;
    const double res = best_res;
    if (!(res <= tol * residual_scale(p)))
        throw SynthesisError("Riccati iteration did not converge: residual " + std::to_string(res) +
                             " (relative " + std::to_string(res / residual_scale(p)) + ")");

    AreSolution sol;
    sol.V2 = 0.5 * (p + p.transpose());
    sol.Acl = a - b * (r_inv_bt * sol.V2);
    sol.residual_norm = res;
    if (detail::spectral_abscissa(sol.Acl) >= 0.0)
        throw SynthesisError("computed Riccati solution is not stabilizing");
    return sol;
}

}  // namespace ppr

#pragma once

// Kronecker-product primitives: repeated Kronecker powers, perfect shuffle
// permutations, coefficient symmetrization, and application of k-way
// Lyapunov operators without ever forming n^k x n^k matrices.

#include <algorithm>
#include <complex>
#include <numeric>
#include <vector>

#include "ppr/types.hpp"

namespace ppr {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// x (x) x (x) ... (x) x, k factors. k = 0 gives the scalar [1].
template <class Scalar>
VectorX<Scalar> kron_power_gen(const Eigen::Ref<const VectorX<Scalar>>& x, int k) {
    const Index n = x.size();
    VectorX<Scalar> out = VectorX<Scalar>::Ones(1);
    for (int i = 0; i < k; ++i) {
        VectorX<Scalar> next(out.size() * n);
        for (Index a = 0; a < out.size(); ++a) next.segment(a * n, n) = out[a] * x;
        out.swap(next);
    }
    return out;
}

inline KronVector kron_power(const Vector& x, int k) {
    if (k < 0) throw DimensionError("kron_power: k must be >= 0");
    return KronVector(kron_power_gen<double>(x, k), x.size(), k);
}

/// S_{q,p} v, realized as a reshape-transpose-reshape; no matrix is formed.
inline Vector apply_shuffle(const ShuffleSpec& spec, const Vector& v) {
    if (v.size() != spec.p * spec.q)
        throw DimensionError("apply_shuffle: length " + std::to_string(v.size()) +
                             " != p*q = " + std::to_string(spec.p * spec.q));
    Eigen::Map<const Matrix> a(v.data(), spec.p, spec.q);
    Vector out(v.size());
    Eigen::Map<Matrix>(out.data(), spec.q, spec.p) = a.transpose();
    return out;
}

namespace detail {

// Walks the base-n digits (d_0 most significant) of linear indices in
// increasing order.
inline void increment_digits(std::vector<Index>& digits, Index n) {
    for (int s = static_cast<int>(digits.size()) - 1; s >= 0; --s) {
        if (++digits[s] < n) return;
        digits[s] = 0;
    }
}

inline bool digits_sorted(const std::vector<Index>& digits) {
    return std::is_sorted(digits.begin(), digits.end());
}

inline Index digits_to_index(const std::vector<Index>& digits, Index n) {
    Index idx = 0;
    for (Index d : digits) idx = idx * n + d;
    return idx;
}

}  // namespace detail

/// In-place orbit averaging over multi-index permutations: each orbit is
/// visited once from its sorted canonical representative; k! shuffle
/// matrices are never materialized.
inline void symmetrize_inplace(Vector& v, Index n, int k) {
    if (v.size() != kron_length(n, k)) throw DimensionError("symmetrize: bad length");
    if (k <= 1 || n <= 1) return;
    std::vector<Index> digits(k, 0), perm;
    std::vector<Index> orbit;
    const Index total = v.size();
    for (Index i = 0; i < total; ++i, detail::increment_digits(digits, n)) {
        if (!detail::digits_sorted(digits)) continue;
        perm = digits;
        orbit.clear();
        double sum = 0.0;
        bool constant = true;
        do {
            const Index j = detail::digits_to_index(perm, n);
            orbit.push_back(j);
            sum += v[j];
            constant = constant && (v[j] == v[orbit.front()]);
        } while (std::next_permutation(perm.begin(), perm.end()));
        if (constant) continue;  // keeps symmetrize bit-exact on fixed points
        const double mean = sum / static_cast<double>(orbit.size());
        for (Index j : orbit) v[j] = mean;
    }
}

inline KronVector symmetrize(const KronVector& v) {
    if (v.k < 1) throw DimensionError("symmetrize: order must be >= 1");
    KronVector out = v;
    symmetrize_inplace(out.data, out.n, out.k);
    return out;
}

namespace detail {

// Core mode kernel: contracts slot `slot` (0-based) of the order-k tensor v
// over R^n against W (n x c), expanding that slot to dimension c:
//   out[(alpha, T, gamma)] = sum_j W(j, T) v[(alpha, j, gamma)].
// Equals (I^(slot) (x) W^T (x) I^(k-1-slot)) v. Runs as per-block GEMMs.
template <class WType, class Scalar>
VectorX<Scalar> contract_mode(const WType& w, const VectorX<Scalar>& v, Index n, int k, int slot) {
    if (slot < 0 || slot >= k) throw DimensionError("contract_mode: slot out of range");
    const Index c = w.cols();
    if (w.rows() != n) throw DimensionError("contract_mode: W rows != n");
    if (v.size() != kron_length(n, k)) throw DimensionError("contract_mode: bad tensor length");
    const Index lead = kron_length(n, slot);            // alpha range
    const Index trail = kron_length(n, k - 1 - slot);   // gamma range
    VectorX<Scalar> out(lead * c * trail);
    using MapIn = Eigen::Map<const MatrixX<Scalar>>;
    using MapOut = Eigen::Map<MatrixX<Scalar>>;
    if (trail == 1) {
        // last slot: single GEMM W^T * reshape(v, n, lead)
        MapIn in(v.data(), n, lead);
        MapOut(out.data(), c, lead).noalias() = w.transpose() * in;
    } else {
        for (Index a = 0; a < lead; ++a) {
            MapIn in(v.data() + a * n * trail, trail, n);
            MapOut(out.data() + a * c * trail, trail, c).noalias() = in * w;
        }
    }
    return out;
}

}  // namespace detail

/// L_k(A)^T v for square A, term-by-term via mode contractions; the
/// n^k x n^k Kronecker sum is never formed.
inline KronVector apply_kway_lyapunov_transpose(const Matrix& acl, int k, const KronVector& v) {
    if (acl.rows() != acl.cols()) throw DimensionError("apply_kway_lyapunov_transpose: A not square");
    if (acl.rows() != v.n || v.k != k)
        throw DimensionError("apply_kway_lyapunov_transpose: order/dimension mismatch");
    Vector out = Vector::Zero(v.size());
    for (int s = 0; s < k; ++s) out += detail::contract_mode(acl, v.data, v.n, k, s);
    return KronVector(std::move(out), v.n, k);
}

/// Def-2.3 symmetry check: invariance under the S_{n^j,n^i} splits plus all
/// adjacent slot transpositions (which generate the full permutation group).
inline bool check_symmetric(const KronVector& v, double tol) {
    if (tol < 0) throw DimensionError("check_symmetric: tol must be >= 0");
    if (v.k <= 1 || v.n <= 1) return true;
    const Index n = v.n;
    for (int i = 1; i < v.k; ++i) {
        const ShuffleSpec spec{kron_length(n, v.k - i), kron_length(n, i)};
        if (((v.data - apply_shuffle(spec, v.data)).cwiseAbs().maxCoeff()) > tol) return false;
    }
    // adjacent transpositions, applied as index permutations
    for (int s = 0; s + 1 < v.k; ++s) {
        const Index lead = kron_length(n, s);
        const Index trail = kron_length(n, v.k - 2 - s);
        for (Index a = 0; a < lead; ++a)
            for (Index i = 0; i < n; ++i)
                for (Index j = i + 1; j < n; ++j)
                    for (Index g = 0; g < trail; ++g) {
                        const Index base = a * n * n * trail;
                        const double d = v.data[base + (i * n + j) * trail + g] -
                                         v.data[base + (j * n + i) * trail + g];
                        if (std::abs(d) > tol) return false;
                    }
    }
    return true;
}

}  // namespace ppr

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ppr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

// Error hierarchy; the CLI maps these onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct ModelError : Error {
    using Error::Error;
};
struct SynthesisError : Error {
    using Error::Error;
};
struct VerificationError : Error {
    using Error::Error;
};

/// n^k as a vector length, with overflow guard.
inline Index kron_length(Index n, int k) {
    if (n < 0 || k < 0) throw DimensionError("kron_length: need n >= 0, k >= 0");
    Index len = 1;
    for (int i = 0; i < k; ++i) {
        if (n != 0 && len > (std::numeric_limits<Index>::max)() / (n == 0 ? 1 : n))
            throw DimensionError("kron_length: n^k overflows index type");
        len *= n;
    }
    return len;
}

// Order-k Kronecker coefficient/monomial vector over R^n.
//
// Multi-index convention (fixed globally): entry (i_1,...,i_k) lives at
// linear index i_1*n^(k-1) + ... + i_k, i.e. the LAST factor's index varies
// fastest. This matches vec of a column-major matrix and
// (a (x) b)[i*len(b)+j] = a[i]*b[j].
struct KronVector {
    Vector data;
    Index n = 0;
    int k = 0;

    KronVector() = default;
    KronVector(Vector d, Index n_, int k_) : data(std::move(d)), n(n_), k(k_) {
        if (data.size() != kron_length(n, k))
            throw DimensionError("KronVector: data length " + std::to_string(data.size()) +
                                 " != n^k = " + std::to_string(kron_length(n, k)));
    }
    Index size() const { return data.size(); }
};

// Perfect shuffle S_{q,p}: the permutation of size p*q with
// S_{q,p} vec(A) = vec(A^T) for A in R^{p x q}.
struct ShuffleSpec {
    Index q = 0;  // left block size
    Index p = 0;  // right block size
};

}  // namespace ppr

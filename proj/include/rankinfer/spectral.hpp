#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "rankinfer/errors.hpp"

namespace rankinfer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline void check_finite(const Matrix& mat, const char* where) {
    if (!mat.allFinite()) {
        throw InvalidInput(std::string(where) + ": input contains a non-finite entry");
    }
}

inline void check_tall(const Matrix& mat, const char* where) {
    if (mat.rows() < mat.cols()) {
        throw DimensionError(std::string(where) +
                             ": input has m < k; transpose the input "
                             "(singular values and rank are transpose-invariant)");
    }
}

// An estimated m x k matrix together with the rate tau_n at which it
// converges (typically sqrt(n)).
struct MatrixEstimate {
    Matrix values;
    double rate = 1.0;
    std::optional<std::int64_t> n;  // sample size, metadata only

    MatrixEstimate(Matrix v, double tau,
                   std::optional<std::int64_t> sample_size = std::nullopt)
        : values(std::move(v)), rate(tau), n(sample_size) {
        check_finite(values, "MatrixEstimate");
        check_tall(values, "MatrixEstimate");
        if (!(rate > 0.0)) throw InvalidArgument("MatrixEstimate: rate must be positive");
    }
};

// Full singular value decomposition Pi = P Sigma Q^T with P of size m x m,
// Q of size k x k and the k singular values in nonincreasing order.
// split_index records the block split P = [P1, P2], Q = [Q1, Q2].
struct SpectralDecomposition {
    Vector singular_values;
    Matrix left_vectors;   // P, m x m orthonormal
    Matrix right_vectors;  // Q, k x k orthonormal
    int split_index = 0;
};

struct SubspaceBlocks {
    Matrix P1, P2, Q1, Q2;
};

// Deterministic full SVD. Signs are fixed so that each left vector's
// largest-magnitude entry is positive; downstream quantities are invariant
// to the choice but serialized output should be stable.
inline SpectralDecomposition svd(const Matrix& mat) {
    check_finite(mat, "svd");
    check_tall(mat, "svd");
    const Eigen::Index m = mat.rows();
    const Eigen::Index k = mat.cols();

    SpectralDecomposition dec;
    if (mat.isZero(0.0)) {
        // Any orthonormal pair is valid for the zero matrix; identity is canonical.
        dec.singular_values = Vector::Zero(k);
        dec.left_vectors = Matrix::Identity(m, m);
        dec.right_vectors = Matrix::Identity(k, k);
        return dec;
    }

    Eigen::JacobiSVD<Matrix> solver(mat, Eigen::ComputeFullU | Eigen::ComputeFullV);
    dec.singular_values = solver.singularValues();
    dec.left_vectors = solver.matrixU();
    dec.right_vectors = solver.matrixV();
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::Index arg = 0;
        dec.left_vectors.col(j).cwiseAbs().maxCoeff(&arg);
        if (dec.left_vectors(arg, j) < 0.0) {
            dec.left_vectors.col(j) = -dec.left_vectors.col(j);
            // Left vectors beyond the first k have no paired right vector.
            if (j < k) dec.right_vectors.col(j) = -dec.right_vectors.col(j);
        }
    }
    return dec;
}

// Sum of the k - r smallest squared singular values. Zero (numerically) iff
// rank(mat) <= r.
inline double phi_r(const Matrix& mat, int r) {
    check_finite(mat, "phi_r");
    check_tall(mat, "phi_r");
    const int k = static_cast<int>(mat.cols());
    if (r < 0 || r > k - 1) {
        throw InvalidArgument("phi_r: r must lie in [0, k-1]");
    }
    Eigen::JacobiSVD<Matrix> solver(mat);
    const Vector& s = solver.singularValues();
    double acc = 0.0;
    for (int j = r; j < k; ++j) acc += s(j) * s(j);
    return acc;
}

// Tail sum of squared singular values for an already available spectrum.
inline double phi_from_singular_values(const Vector& s, int r) {
    double acc = 0.0;
    for (Eigen::Index j = r; j < s.size(); ++j) acc += s(j) * s(j);
    return acc;
}

// Splits the singular vectors at r0: P2 holds the last m - r0 left vectors,
// Q2 the last k - r0 right vectors.
inline SubspaceBlocks partition(const SpectralDecomposition& dec, int r0) {
    const Eigen::Index m = dec.left_vectors.rows();
    const Eigen::Index k = dec.right_vectors.rows();
    if (r0 < 0 || r0 > k) {
        throw InvalidArgument("partition: split index must lie in [0, k]");
    }
    SubspaceBlocks blocks;
    blocks.P1 = dec.left_vectors.leftCols(r0);
    blocks.P2 = dec.left_vectors.rightCols(m - r0);
    blocks.Q1 = dec.right_vectors.leftCols(r0);
    blocks.Q2 = dec.right_vectors.rightCols(k - r0);
    return blocks;
}

// Relative numerical rank with the standard spectral cutoff 1e-10 * sigma_1.
inline int numerical_rank(const Vector& singular_values) {
    if (singular_values.size() == 0) return 0;
    const double cutoff = 1e-10 * singular_values(0);
    int rank = 0;
    for (Eigen::Index j = 0; j < singular_values.size(); ++j) {
        if (singular_values(j) > cutoff) ++rank;
    }
    return rank;
}

}  // namespace rankinfer

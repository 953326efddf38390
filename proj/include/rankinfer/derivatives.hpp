#pragma once

#include <optional>
#include <string>

#include "rankinfer/spectral.hpp"

namespace rankinfer {

enum class DerivativeKind { Analytic, Numerical };

// Configuration of the second-derivative estimator plugged into the
// bootstrap: the analytic form needs an estimated rank (obtained from the
// kappa threshold), the numerical form uses kappa as a step size.
struct DerivativeEstimator {
    DerivativeKind kind = DerivativeKind::Analytic;
    double kappa = 0.0;
    int r = 0;
    std::optional<int> estimated_rank;  // filled by the analytic path, <= r
};

inline const char* to_string(DerivativeKind kind) {
    return kind == DerivativeKind::Analytic ? "analytic" : "numerical";
}

// First directional derivative of phi_r at pi in the given direction.
//
// Returns exactly 0 when phi_r(pi) is numerically zero (Pi U = 0 on the whole
// minimizing set). Otherwise evaluates 2 tr(Q2^T pi^T M Q2) on the last k - r
// right singular vectors; the trace is invariant to rotations within the
// minimizing subspace, so this equals the minimum over the argmin set
// whenever sigma_r(pi) > sigma_{r+1}(pi). A tie across that boundary makes
// the subspace non-unique and raises DegenerateSubspace carrying the value
// evaluated on one choice.
inline double first_derivative(const Matrix& pi, int r, const Matrix& direction) {
    check_finite(direction, "first_derivative");
    if (pi.rows() != direction.rows() || pi.cols() != direction.cols()) {
        throw DimensionError("first_derivative: direction must match pi in shape");
    }
    const int k = static_cast<int>(pi.cols());
    if (r < 0 || r > k - 1) throw InvalidArgument("first_derivative: r must lie in [0, k-1]");

    const SpectralDecomposition dec = svd(pi);
    const double tail = phi_from_singular_values(dec.singular_values, r);
    if (tail < 1e-12) return 0.0;

    const Matrix q2 = dec.right_vectors.rightCols(k - r);
    const double value =
        2.0 * (q2.transpose() * pi.transpose() * direction * q2).trace();
    if (r >= 1) {
        const double gap_tol = 1e-8 * dec.singular_values(0);
        if (dec.singular_values(r - 1) - dec.singular_values(r) < gap_tol) {
            throw DegenerateSubspace(
                "first_derivative: singular values tied across the r-boundary; "
                "the minimizing subspace is not unique",
                value);
        }
    }
    return value;
}

// Second directional derivative of phi_r at a matrix of rank r0 <= r, in
// closed form: the sum of the k - r smallest squared singular values of
// P2^T M Q2, where P2 and Q2 span the null singular subspaces. When r0 = r
// this is the full squared Frobenius norm of P2^T M Q2.
inline double second_derivative_analytic(const Matrix& p2, const Matrix& q2,
                                         const Matrix& direction, int r, int r0) {
    if (r0 > r) throw InvalidArgument("second_derivative_analytic: requires r0 <= r");
    if (r0 < 0) throw InvalidArgument("second_derivative_analytic: requires r0 >= 0");
    const Eigen::Index k = q2.rows();
    if (r >= k) throw InvalidArgument("second_derivative_analytic: requires r < k");
    if (p2.rows() - p2.cols() != r0 || q2.rows() - q2.cols() != r0) {
        throw DimensionError(
            "second_derivative_analytic: block dimensions inconsistent with r0");
    }
    if (q2.cols() == 0) return 0.0;  // empty block convention: the sum is empty

    const Matrix b = p2.transpose() * direction * q2;  // (m-r0) x (k-r0)
    Eigen::JacobiSVD<Matrix> solver(b);
    const Vector& s = solver.singularValues();
    double acc = 0.0;
    for (Eigen::Index j = r - r0; j < s.size(); ++j) acc += s(j) * s(j);
    return acc;
}

// Finite-sample difference-quotient estimator of the second derivative.
// The output is intentionally not clamped at zero: consistency of the
// bootstrap uses the raw value, and callers decide how to treat negatives.
inline double second_derivative_numerical(const Matrix& pi_hat, const Matrix& direction,
                                          double kappa, int r) {
    if (!(kappa > 0.0)) {
        throw InvalidArgument("second_derivative_numerical: kappa must be positive");
    }
    return (phi_r(pi_hat + kappa * direction, r) - phi_r(pi_hat, r)) / (kappa * kappa);
}

// Rank selected by thresholding singular values at kappa, capped at r:
// max{ j in 1..r : sigma_j(pi_hat) >= kappa }, or 0 when the set is empty.
inline int threshold_rank(const Matrix& pi_hat, double kappa, int r) {
    if (!(kappa > 0.0)) throw InvalidArgument("threshold_rank: kappa must be positive");
    const int k = static_cast<int>(pi_hat.cols());
    if (r < 0 || r > k - 1) throw InvalidArgument("threshold_rank: r must lie in [0, k-1]");
    Eigen::JacobiSVD<Matrix> solver(pi_hat);
    const Vector& s = solver.singularValues();
    int rank = 0;
    for (int j = 0; j < r; ++j) {
        if (s(j) >= kappa) rank = j + 1;
    }
    return rank;
}

}  // namespace rankinfer

#pragma once

// Dense control-theoretic linear algebra for small systems (n <= 10):
// Hurwitz test, continuous Lyapunov solver and LQR synthesis.

#include <algorithm>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "core.hpp"

namespace lstm_mrac {

/// Baseline state feedback u = -K x together with the closed loop it produces.
struct StabilizedLoop {
    Matrix gain_K;      // m x n
    Matrix closed_A_m;  // n x n, A - B K
    Matrix lyap_P;      // n x n, symmetric positive definite
};

/// True iff every eigenvalue of `A` has real part below -1e-12.
inline bool is_hurwitz(const Matrix& A) {
    detail::require(A.rows() == A.cols(), ErrorKind::NonSquare,
                    "is_hurwitz expects a square matrix, got " + detail::shape(A));
    detail::require(detail::all_finite(A), ErrorKind::NonFinite, "is_hurwitz: non-finite entry");
    if (A.size() == 0) return true;
    Eigen::EigenSolver<Matrix> solver(A, /*computeEigenvectors=*/false);
    detail::require(solver.info() == Eigen::Success, ErrorKind::NoConvergence,
                    "eigenvalue iteration did not converge");
    return (solver.eigenvalues().real().array() < -1e-12).all();
}

namespace detail {

// Solves A_m^T P + P A_m + Q = 0 through vec(A^T P + P A) = (I (x) A^T + A^T (x) I) vec(P).
// No definiteness checks; callers that need them go through solve_lyapunov.
inline Matrix lyapunov_kronecker(const Matrix& A_m, const Matrix& Q) {
    const Eigen::Index n = A_m.rows();
    const Eigen::Index nn = n * n;
    const Matrix At = A_m.transpose();
    Matrix L = Matrix::Zero(nn, nn);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            // row index of P(i, j) in column-major vec is j*n + i
            const Eigen::Index row = j * n + i;
            for (Eigen::Index k = 0; k < n; ++k) {
                L(row, j * n + k) += At(i, k);  // (A^T P)(i,j) = sum_k A^T(i,k) P(k,j)
                L(row, k * n + i) += A_m(k, j);  // (P A)(i,j)  = sum_k P(i,k) A(k,j)
            }
        }
    }
    Vector rhs = -Eigen::Map<const Vector>(Q.data(), nn);
    Eigen::FullPivLU<Matrix> lu(L);
    require(lu.rank() == nn, ErrorKind::SingularSystem,
            "Lyapunov operator is rank deficient (" + std::to_string(lu.rank()) + " < " +
                std::to_string(nn) + ")");
    Vector p = lu.solve(rhs);
    Matrix P = Eigen::Map<Matrix>(p.data(), n, n);
    return 0.5 * (P + P.transpose());
}

inline bool is_symmetric(const Matrix& M, double tol = 1e-12) {
    return M.rows() == M.cols() && (M - M.transpose()).norm() <= tol * std::max(1.0, M.norm());
}

inline bool is_positive_definite(const Matrix& M) {
    Eigen::LLT<Matrix> llt(M);
    return llt.info() == Eigen::Success;
}

}  // namespace detail

/// Symmetric P with A_m^T P + P A_m + Q = 0. A_m must be Hurwitz and Q symmetric PD.
inline Matrix solve_lyapunov(const Matrix& A_m, const Matrix& Q) {
    detail::require(A_m.rows() == A_m.cols(), ErrorKind::NonSquare,
                    "A_m must be square, got " + detail::shape(A_m));
    detail::require(Q.rows() == A_m.rows() && Q.cols() == A_m.cols(), ErrorKind::DimensionMismatch,
                    "Q is " + detail::shape(Q) + ", A_m is " + detail::shape(A_m));
    detail::require(detail::is_symmetric(Q), ErrorKind::InvalidArgument, "Q must be symmetric");
    detail::require(detail::is_positive_definite(Q), ErrorKind::InvalidArgument,
                    "Q must be positive definite");
    detail::require(is_hurwitz(A_m), ErrorKind::NonHurwitz, "A_m has an eigenvalue with Re >= 0");
    return detail::lyapunov_kronecker(A_m, Q);
}

/// Frobenius norm of A^T P + P A - P B R^-1 B^T P + Q.
inline double care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                            const Matrix& P) {
    const Matrix BRB = B * R.ldlt().solve(B.transpose());
    return (A.transpose() * P + P * A - P * BRB * P + Q).norm();
}

struct LqrResult {
    StabilizedLoop loop;           // lyap_P holds the Riccati solution
    Matrix riccati_P;
    int iterations = 0;
    double care_residual = 0.0;
    std::vector<double> trace_history;  // trace(P_k) of every Kleinman iterate
};

namespace detail {

inline Eigen::Index controllability_rank(const Matrix& A, const Matrix& B) {
    const Eigen::Index n = A.rows();
    Matrix ctrb(n, n * B.cols());
    Matrix block = B;
    for (Eigen::Index k = 0; k < n; ++k) {
        ctrb.middleCols(k * B.cols(), B.cols()) = block;
        block = A * block;
    }
    Eigen::FullPivLU<Matrix> lu(ctrb);
    lu.setThreshold(1e-10);
    return lu.rank();
}

// Stabilizing seed for Kleinman. Tries K = c B^T for c = 0, 1, 10, ..., 1e6 and falls back to
// Bass' shifted-Lyapunov construction when that family never stabilizes (e.g. integrator states
// that B does not reach directly).
inline Matrix initial_stabilizing_gain(const Matrix& A, const Matrix& B) {
    if (is_hurwitz(A)) return Matrix::Zero(B.cols(), A.rows());
    for (double c = 1.0; c <= 1e6; c *= 10.0) {
        Matrix K = c * B.transpose();
        if (is_hurwitz(A - B * K)) return K;
    }
    Eigen::EigenSolver<Matrix> es(A, false);
    const double shift = es.eigenvalues().real().cwiseAbs().maxCoeff() + 1.0;
    const Matrix M = -(A + shift * Matrix::Identity(A.rows(), A.cols())).transpose();
    // M^T Z + Z M + 2 B B^T = 0  <=>  (A + shift I) Z + Z (A + shift I)^T = 2 B B^T, with
    // -(A + shift I) Hurwitz and shift > 0
    const Matrix Z = lyapunov_kronecker(M, 2.0 * B * B.transpose());
    Matrix K = B.transpose() * Z.inverse();
    require(is_hurwitz(A - B * K), ErrorKind::NoConvergence,
            "could not construct an initial stabilizing gain");
    return K;
}

}  // namespace detail

/// LQR synthesis by Kleinman-Newton iteration, with diagnostics.
inline LqrResult lqr_solve(const Matrix& A, const Matrix& B, const Matrix& Q_lqr, const Matrix& R_lqr,
                           int max_iterations = 200) {
    const Eigen::Index n = A.rows();
    detail::require(A.rows() == A.cols(), ErrorKind::NonSquare, "A must be square");
    detail::require(B.rows() == n, ErrorKind::DimensionMismatch,
                    "B is " + detail::shape(B) + ", A is " + detail::shape(A));
    detail::require(Q_lqr.rows() == n && Q_lqr.cols() == n, ErrorKind::DimensionMismatch,
                    "Q_lqr is " + detail::shape(Q_lqr));
    detail::require(R_lqr.rows() == B.cols() && R_lqr.cols() == B.cols(),
                    ErrorKind::DimensionMismatch, "R_lqr is " + detail::shape(R_lqr));
    detail::require(detail::is_symmetric(Q_lqr), ErrorKind::InvalidArgument, "Q_lqr not symmetric");
    detail::require(detail::is_symmetric(R_lqr) && detail::is_positive_definite(R_lqr),
                    ErrorKind::InvalidArgument, "R_lqr must be symmetric positive definite");
    detail::require(detail::controllability_rank(A, B) == n, ErrorKind::NotControllable,
                    "controllability matrix is rank deficient");

    const auto R_solver = R_lqr.ldlt();
    LqrResult out;
    Matrix K = detail::initial_stabilizing_gain(A, B);
    Matrix P_prev;
    double last_step = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iterations; ++it) {
        const Matrix A_k = A - B * K;
        const Matrix Q_k = Q_lqr + K.transpose() * R_lqr * K;
        Matrix P = detail::lyapunov_kronecker(A_k, 0.5 * (Q_k + Q_k.transpose()));
        out.trace_history.push_back(P.trace());
        K = R_solver.solve(B.transpose() * P);
        // Converged, or Newton has reached the round-off floor of the Lyapunov solve.
        bool settled = false;
        if (P_prev.size() != 0) {
            const double step = (P - P_prev).norm(), scale = std::max(1.0, P.norm());
            settled = step <= 1e-12 * scale || (step >= last_step && step <= 1e-6 * scale);
            last_step = step;
        }
        P_prev = std::move(P);
        out.iterations = it;
        if (settled) break;
        detail::require(it < max_iterations, ErrorKind::NoConvergence,
                        "Kleinman iteration exceeded " + std::to_string(max_iterations) + " steps");
    }
    out.care_residual = care_residual(A, B, Q_lqr, R_lqr, P_prev);
    out.riccati_P = P_prev;
    out.loop.gain_K = K;
    out.loop.closed_A_m = A - B * K;
    out.loop.lyap_P = P_prev;
    detail::require(is_hurwitz(out.loop.closed_A_m), ErrorKind::NoConvergence,
                    "LQR closed loop is not Hurwitz");
    return out;
}

/// K = R^-1 B^T P* from the CARE solution; the returned loop's P is the Riccati matrix.
inline StabilizedLoop lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q_lqr,
                               const Matrix& R_lqr) {
    return lqr_solve(A, B, Q_lqr, R_lqr).loop;
}

}  // namespace lstm_mrac

#pragma once

// Independent reference computations used only by the tests.

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Gaussian elimination with partial pivoting on plain std::vector storage.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

// A^T P + P A + Q = 0 written out entry by entry, unknowns P(i, j) in row-major order.
inline Matrix lyapunov(const Matrix& A, const Matrix& Q) {
    const std::size_t n = std::size_t(A.rows());
    std::vector<std::vector<double>> L(n * n, std::vector<double>(n * n, 0.0));
    std::vector<double> rhs(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t row = i * n + j;
            for (std::size_t k = 0; k < n; ++k) {
                L[row][k * n + j] += A(Eigen::Index(k), Eigen::Index(i));
                L[row][i * n + k] += A(Eigen::Index(k), Eigen::Index(j));
            }
            rhs[row] = -Q(Eigen::Index(i), Eigen::Index(j));
        }
    const auto p = gauss_solve(L, rhs);
    Matrix P(A.rows(), A.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) P(Eigen::Index(i), Eigen::Index(j)) = p[i * n + j];
    return P;
}

// Stabilizing CARE solution from the stable invariant subspace of the Hamiltonian.
inline Matrix care_hamiltonian(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
    const Eigen::Index n = A.rows();
    Matrix H(2 * n, 2 * n);
    H << A, -B * R.inverse() * B.transpose(), -Q, -A.transpose();
    Eigen::ComplexEigenSolver<Matrix> es(H);
    Eigen::MatrixXcd basis(2 * n, n);
    Eigen::Index c = 0;
    for (Eigen::Index k = 0; k < 2 * n; ++k)
        if (es.eigenvalues()(k).real() < 0.0) basis.col(c++) = es.eigenvectors().col(k);
    const Eigen::MatrixXcd X = basis.topRows(n), Y = basis.bottomRows(n);
    return (Y * X.inverse()).real();
}

// Dense exponential-free RK4 of x' = A x + b(t), used to cross-check integrations.
template <class F>
inline Vector rk4(const Matrix& A, Vector x, F&& b, double dt, int steps) {
    for (int k = 0; k < steps; ++k) {
        const double t = k * dt;
        const Vector k1 = A * x + b(t);
        const Vector k2 = A * (x + 0.5 * dt * k1) + b(t + 0.5 * dt);
        const Vector k3 = A * (x + 0.5 * dt * k2) + b(t + 0.5 * dt);
        const Vector k4 = A * (x + dt * k3) + b(t + dt);
        x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return x;
}

}  // namespace oracle

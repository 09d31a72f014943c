#include <random>

#include <gtest/gtest.h>

#include "lstm_mrac/plant.hpp"
#include "lstm_mrac/scenarios.hpp"
#include "oracles.hpp"

using namespace lstm_mrac;

namespace {

struct B747Aug {
    Matrix A, B;
};

// Augmented matrices written out by hand rather than through build_augmented.
B747Aug b747_augmented() {
    B747Aug s;
    s.A.resize(3, 3);
    s.A << -0.32, 0.86, 0, -0.93, -0.43, 0, 0, -1, 0;
    s.B.resize(3, 1);
    s.B << -0.02, -1.16, 0;
    return s;
}

Matrix lyap_residual(const Matrix& A, const Matrix& P, const Matrix& Q) { return A.transpose() * P + P * A + Q; }

}  // namespace

TEST(IsHurwitz, Examples) {
    EXPECT_TRUE(is_hurwitz(-Matrix::Identity(3, 3)));
    Matrix rot(2, 2);
    rot << 0, 1, -1, 0;
    EXPECT_FALSE(is_hurwitz(rot));
    EXPECT_TRUE(is_hurwitz(b747_model().A_p));
    EXPECT_FALSE(is_hurwitz(Matrix::Zero(2, 2)));
}

TEST(IsHurwitz, NonSquareThrows) {
    try {
        is_hurwitz(Matrix::Zero(2, 3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonSquare);
    }
}

TEST(IsHurwitz, B747CharacteristicPolynomial) {
    // s^2 + 0.75 s + 0.9374: positive coefficients, so both roots are in the open left half plane
    const Matrix A = b747_model().A_p;
    EXPECT_NEAR(-A.trace(), 0.75, 1e-15);
    EXPECT_NEAR(A.determinant(), 0.9374, 1e-12);
}

TEST(SolveLyapunov, DiagonalCase) {
    const Matrix P = solve_lyapunov(-Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2));
    EXPECT_LT((P - Matrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(SolveLyapunov, UnstableRejected) {
    try {
        solve_lyapunov(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonHurwitz);
    }
}

TEST(SolveLyapunov, RejectsIndefiniteQ) {
    Matrix Q = Matrix::Identity(2, 2);
    Q(1, 1) = -1;
    EXPECT_THROW(solve_lyapunov(-Matrix::Identity(2, 2), Q), Error);
}

TEST(SolveLyapunov, B747MatchesOracle) {
    const auto s = b747_augmented();
    const StabilizedLoop loop = lqr_gain(s.A, s.B, Matrix::Identity(3, 3), Matrix::Identity(1, 1));
    const Matrix Q = Matrix::Identity(3, 3);
    const Matrix P = solve_lyapunov(loop.closed_A_m, Q);
    const Matrix P_ref = oracle::lyapunov(loop.closed_A_m, Q);
    EXPECT_LT((P - P_ref).norm(), 1e-10);
    EXPECT_LT(lyap_residual(loop.closed_A_m, P, Q).norm(), 1e-9);
    EXPECT_LT((P - P.transpose()).norm(), 1e-12);
    EXPECT_EQ(Eigen::LLT<Matrix>(P).info(), Eigen::Success);
}

TEST(SolveLyapunov, RandomStableMatricesAgainstOracle) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 2 + trial % 5;
        Matrix A(n, n);
        for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = nd(rng);
        Eigen::EigenSolver<Matrix> es(A, false);
        A -= (es.eigenvalues().real().maxCoeff() + 0.5) * Matrix::Identity(n, n);
        Matrix G(n, n);
        for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = nd(rng);
        const Matrix Q = G * G.transpose() + Matrix::Identity(n, n);
        const Matrix P = solve_lyapunov(A, Q);
        EXPECT_LT((P - oracle::lyapunov(A, Q)).norm(), 1e-8 * std::max(1.0, P.norm()));
        EXPECT_LT(lyap_residual(A, P, Q).norm(), 1e-9 * std::max(1.0, P.norm()));
        EXPECT_LT((P - P.transpose()).norm(), 1e-12);
    }
}

TEST(Lqr, ScalarIntegrator) {
    Matrix a = Matrix::Zero(1, 1), b = Matrix::Ones(1, 1), q = Matrix::Ones(1, 1), r = Matrix::Ones(1, 1);
    const LqrResult res = lqr_solve(a, b, q, r);
    EXPECT_NEAR(res.loop.gain_K(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(res.riccati_P(0, 0), 1.0, 1e-12);
}

TEST(Lqr, NotControllable) {
    try {
        lqr_gain(Matrix::Identity(2, 2), Matrix::Zero(2, 1), Matrix::Identity(2, 2), Matrix::Ones(1, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotControllable);
    }
}

TEST(Lqr, B747MatchesHamiltonianOracle) {
    const auto s = b747_augmented();
    const Matrix Q = Matrix::Identity(3, 3), R = Matrix::Identity(1, 1);
    const LqrResult res = lqr_solve(s.A, s.B, Q, R);
    const Matrix P_ref = oracle::care_hamiltonian(s.A, s.B, Q, R);
    const Matrix K_ref = R.inverse() * s.B.transpose() * P_ref;
    EXPECT_LT((res.loop.gain_K - K_ref).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT(care_residual(s.A, s.B, Q, R, res.riccati_P), 1e-8);
    EXPECT_TRUE(is_hurwitz(res.loop.closed_A_m));
}

TEST(Lqr, KleinmanTraceMonotone) {
    const auto s = b747_augmented();
    const LqrResult res = lqr_solve(s.A, s.B, Matrix::Identity(3, 3), Matrix::Identity(1, 1));
    ASSERT_GE(res.trace_history.size(), 2u);
    for (std::size_t k = 1; k < res.trace_history.size(); ++k)
        EXPECT_LE(res.trace_history[k], res.trace_history[k - 1] + 1e-10) << "iterate " << k;
}

TEST(Lqr, AlwaysHurwitzOnRandomControllablePairs) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 2 + trial % 4, m = 1 + trial % 2;
        Matrix A(n, n), B(n, m);
        for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = nd(rng);
        for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = nd(rng);
        const Matrix Q = Matrix::Identity(n, n), R = Matrix::Identity(m, m);
        const LqrResult res = lqr_solve(A, B, Q, R);
        EXPECT_TRUE(is_hurwitz(A - B * res.loop.gain_K));
        EXPECT_LT(care_residual(A, B, Q, R, res.riccati_P), 1e-8 * std::max(1.0, res.riccati_P.norm()));
        const Matrix P_ref = oracle::care_hamiltonian(A, B, Q, R);
        EXPECT_LT((res.riccati_P - P_ref).norm(), 1e-6 * std::max(1.0, P_ref.norm()));
    }
}

TEST(Lqr, InitialGainStabilizesIntegrator) {
    const auto s = b747_augmented();
    const Matrix K0 = detail::initial_stabilizing_gain(s.A, s.B);
    EXPECT_TRUE(is_hurwitz(s.A - s.B * K0));
}

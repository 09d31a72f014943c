#include <gtest/gtest.h>

#include "lstm_mrac/analysis.hpp"

using namespace lstm_mrac;

namespace {

AugmentedSystem b747() {
    return build_augmented(b747_model(), Matrix::Identity(3, 3), Matrix::Identity(1, 1), Matrix::Identity(3, 3));
}

EpisodeTrace blank_trace(Eigen::Index rows, double dt = 0.01) {
    EpisodeTrace tr;
    tr.dt = dt;
    tr.t = Vector::LinSpaced(rows, 0.0, dt * double(rows - 1));
    for (auto* m : {&tr.x, &tr.x_m, &tr.e, &tr.e_norm}) m->setZero(3, rows);
    tr.r.setZero(1, rows);
    for (auto* m : {&tr.u_bl, &tr.u_ad, &tr.u_lstm, &tr.u_lstm_raw, &tr.v, &tr.u_cmd, &tr.u_applied, &tr.f_true,
                    &tr.f_hat, &tr.y, &tr.u_r})
        m->setZero(1, rows);
    return tr;
}

}  // namespace

TEST(BoundConstants, AllZero) {
    NnBounds b;
    b.Z_M = 0.0;
    b.eps_N = 0.0;
    const BoundReport r = bound_constants(b, b747(), 0.0, 0.0, 0.0, Matrix::Identity(3, 3));
    EXPECT_EQ(r.C0, 0.0);
    EXPECT_EQ(r.C1, 0.0);
    EXPECT_EQ(r.C2, 0.0);
    EXPECT_EQ(r.q0, 0.0);
    EXPECT_FALSE(r.has_radii());
}

TEST(BoundConstants, SigmoidExample) {
    const NnBounds b = NnBounds::make(std::sqrt(2.0), std::sqrt(2.0), 0.1, Activation::sigmoid);
    EXPECT_NEAR(b.Z_M, 2.0, 1e-15);
    const AugmentedSystem sys = b747();
    const BoundReport r = bound_constants(b, sys, 0.5, 1.0, 0.0, Matrix::Identity(3, 3));
    EXPECT_NEAR(r.C0, 4.1, 1e-14);
    EXPECT_NEAR(r.C1, 1.0, 1e-15);
    EXPECT_NEAR(r.C2, 1.0, 1e-15);
    EXPECT_NEAR(r.q0, sys.PB.norm() * 4.6, 1e-12);
    EXPECT_TRUE(k_z_admissible(1.5, r));
    EXPECT_FALSE(k_z_admissible(0.5, r));
    EXPECT_TRUE(k_z_admissible(0.0, r));
    try {
        uub_radii(r);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::KappaZero);
    }
}

TEST(BoundConstants, RadiiWithKappa) {
    const NnBounds b = NnBounds::make(1.0, 1.0, 0.1, Activation::tanh);
    const AugmentedSystem sys = b747();
    const BoundReport r = bound_constants(b, sys, 0.2, 0.5, 0.3, 2.0 * Matrix::Identity(3, 3));
    const auto [er, zr] = uub_radii(r);
    EXPECT_NEAR(r.lambda_min_Q, 2.0, 1e-14);
    EXPECT_NEAR(er, (0.3 * r.q1 * r.q1 + 4.0 * r.q0) / 4.0, 1e-12);
    // Z_radius is the positive root of kappa Z^2 - kappa q1 Z - q0 = 0
    EXPECT_NEAR(0.3 * zr * zr - 0.3 * r.q1 * zr - r.q0, 0.0, 1e-10);
    EXPECT_GT(zr, 0.0);
}

TEST(BoundConstants, MonotoneInEps) {
    const AugmentedSystem sys = b747();
    double prev = -1.0;
    for (double eps : {0.0, 0.05, 0.1, 0.5, 1.0}) {
        const NnBounds b = NnBounds::make(1.0, 1.0, eps, Activation::sigmoid);
        const BoundReport r = bound_constants(b, sys, 0.1, 1.0, 0.2, Matrix::Identity(3, 3));
        EXPECT_GT(*r.e_radius, prev);
        prev = *r.e_radius;
    }
}

TEST(BoundConstants, Validation) {
    const AugmentedSystem sys = b747();
    const NnBounds b;
    EXPECT_THROW(bound_constants(b, sys, -1.0, 1.0, 0.0, Matrix::Identity(3, 3)), Error);
    EXPECT_THROW(bound_constants(b, sys, 0.0, 1.0, 0.0, Matrix::Identity(2, 2)), Error);
    EXPECT_THROW(bound_constants(b, sys, 0.0, 1.0, 0.0, Matrix::Zero(3, 3)), Error);
}

TEST(EstimateCm, Examples) {
    Matrix A(1, 1), B(1, 1);
    A << -1.0;
    B << 1.0;
    EXPECT_EQ(estimate_Cm(A, B, [](double) { return Vector::Zero(1); }, 10.0), 0.0);
    const double c = estimate_Cm(A, B, [](double) { return Vector::Ones(1); }, 30.0);
    EXPECT_NEAR(c, 1.05, 1e-9);
    const AugmentedSystem sys = b747();
    const double a110 = estimate_Cm(sys, CommandSpec{}, 110.0), a220 = estimate_Cm(sys, CommandSpec{}, 220.0);
    EXPECT_GT(a110, 0.0);
    EXPECT_LT(std::abs(a220 - a110) / a110, 0.01);
}

TEST(HfRatio, Examples) {
    EXPECT_EQ(hf_energy_ratio(Eigen::RowVectorXd::Zero(100), 0.01), 0.0);
    EXPECT_EQ(hf_energy_ratio(Eigen::RowVectorXd::Constant(100, 2.0), 0.01), 0.0);
    Eigen::RowVectorXd slow(2000), fast(2000);
    for (int k = 0; k < 2000; ++k) {
        slow(k) = std::sin(2 * std::numbers::pi * 0.05 * k * 0.01);
        fast(k) = std::sin(2 * std::numbers::pi * 20.0 * k * 0.01);
    }
    const double hs = hf_energy_ratio(slow, 0.01), hf = hf_energy_ratio(fast, 0.01);
    EXPECT_LT(hs, 0.01);
    EXPECT_GT(hf, 0.9);
    EXPECT_LE(hf, 1.0 + 1e-9);
    EXPECT_NEAR(hf_energy_ratio(Eigen::RowVectorXd(3 * fast), 0.01), hf, 1e-12);
}

TEST(TraceMetrics, ZeroTrace) {
    const TraceMetrics mt = trace_metrics(blank_trace(50));
    EXPECT_EQ(mt.steps, 50);
    EXPECT_EQ(mt.pitch_rate_rms, 0.0);
    EXPECT_EQ(mt.pitch_rate_max, 0.0);
    EXPECT_EQ(mt.saturation_steps, 0);
    EXPECT_EQ(mt.rate_saturation_steps, 0);
    EXPECT_EQ(mt.hf_u_lstm(0), 0.0);
}

TEST(TraceMetrics, ConstantAndShift) {
    EpisodeTrace tr = blank_trace(40);
    tr.e.row(1).setConstant(-1.0);
    tr.u_bl.setConstant(2.0);
    tr.u_r(0, 3) = 0.1;
    tr.u_r(0, 7) = -0.1;
    tr.u_applied(0, 5) = 1.0;
    const TraceMetrics mt = trace_metrics(tr);
    EXPECT_DOUBLE_EQ(mt.pitch_rate_rms, 1.0);
    EXPECT_EQ(mt.pitch_rate_max, 1.0);
    EXPECT_NEAR(mt.effort_u_bl(0), 2.0 * 40 * 0.01, 1e-12);
    EXPECT_EQ(mt.rate_saturation_steps, 2);
    EXPECT_EQ(mt.saturation_steps, 1);
    EpisodeTrace shifted = tr;
    shifted.t.array() += 100.0;
    const TraceMetrics ms = trace_metrics(shifted);
    EXPECT_EQ(ms.pitch_rate_rms, mt.pitch_rate_rms);
    EXPECT_EQ(ms.e_rms, mt.e_rms);
}

TEST(TraceMetrics, EmptyTrace) {
    try {
        trace_metrics(EpisodeTrace{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyTrace);
    }
}

TEST(TraceChecks, BoundsAndUub) {
    EpisodeTrace tr = blank_trace(10);
    tr.u_lstm_raw.setConstant(0.5);
    tr.u_lstm_raw(0, 4) = 0.7;
    EXPECT_EQ(output_bound_violations(tr, 0.6), 1);
    EXPECT_EQ(output_bound_violations(tr, 0.7), 0);
    for (int k = 0; k < 10; ++k) tr.e(0, k) = k < 5 ? 1.0 + 0.1 * k : 2.0 - 0.1 * k;
    EXPECT_EQ(uub_spot_check(tr, 0.5), 5);
    EXPECT_EQ(uub_spot_check(tr, 10.0), 0);
    const Vector rate = lyapunov_rate(tr, Matrix::Identity(3, 3));
    EXPECT_NEAR(rate(0), (1.21 - 1.0) / 0.01, 1e-9);
}

TEST(Compare, Ratios) {
    EpisodeTrace a = blank_trace(30);
    a.e.setConstant(0.2);
    a.u_ad.setConstant(1.0);
    EpisodeTrace same = a;
    const Comparison c1 = compare_traces(a, same);
    EXPECT_EQ(c1.pitch_rate_rms_ratio, 1.0);
    EXPECT_EQ(c1.saturation_ratio, 1.0);
    EXPECT_EQ(c1.effort_u_lstm_ratio(0), 1.0);
    EXPECT_FALSE(c1.improved());
    EpisodeTrace half = a;
    half.e *= 0.5;
    const Comparison c2 = compare_traces(a, half);
    EXPECT_DOUBLE_EQ(c2.pitch_rate_rms_ratio, 0.5);
    EXPECT_DOUBLE_EQ(c2.pitch_rate_max_ratio, 0.5);
    EXPECT_TRUE(c2.improved());
    half.u_lstm.setConstant(1.0);
    EXPECT_TRUE(std::isinf(compare_traces(a, half).effort_u_lstm_ratio(0)));
    try {
        compare_traces(a, blank_trace(31));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::GridMismatch);
    }
}

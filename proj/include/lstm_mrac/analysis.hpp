#pragma once

// Ultimate-boundedness constants of the adaptive scheme and per-trace comparison metrics.

#include <functional>
#include <numbers>
#include <optional>

#include "pipeline.hpp"

namespace lstm_mrac {

struct BoundReport {
    double C_m = 0.0;
    double C0 = 0.0, C1 = 0.0, C2 = 0.0;
    double Z_M = 0.0;
    double u_bar_lstm = 0.0;
    double BtP_norm = 0.0;  // ||B^T P||_F
    double q0 = 0.0;
    double q1 = 0.0;                  // only meaningful with kappa > 0
    std::optional<double> e_radius;   // empty when kappa = 0
    std::optional<double> Z_radius;
    double lambda_min_Q = 0.0;
    double kappa = 0.0;

    [[nodiscard]] bool has_radii() const { return e_radius.has_value(); }
};

/// Same as below with the LSTM bound given directly.
inline BoundReport bound_constants(const NnBounds& b, const AugmentedSystem& sys, double u_bar_lstm, double C_m,
                                   double kappa, const Matrix& Q_lyap) {
    detail::require(C_m >= 0.0 && u_bar_lstm >= 0.0 && kappa >= 0.0, ErrorKind::InvalidArgument,
                    "C_m, u_bar_lstm and kappa must be nonnegative");
    detail::require(Q_lyap.rows() == sys.n && Q_lyap.cols() == sys.n, ErrorKind::DimensionMismatch,
                    "Q has shape " + detail::shape(Q_lyap));
    BoundReport r;
    r.C_m = C_m;
    r.Z_M = b.Z_M;
    r.u_bar_lstm = u_bar_lstm;
    r.kappa = kappa;
    r.C0 = 2.0 * b.C_sigma * b.Z_M + b.eps_N;
    r.C1 = 2.0 * b.C_sigma_prime * C_m * b.Z_M;
    r.C2 = 2.0 * b.C_sigma_prime * b.Z_M;
    r.BtP_norm = sys.PB.norm();
    r.q0 = r.BtP_norm * (r.C0 + u_bar_lstm);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Q_lyap + Q_lyap.transpose()));
    r.lambda_min_Q = es.eigenvalues().minCoeff();
    detail::require(r.lambda_min_Q > 0.0, ErrorKind::InvalidArgument, "Q must be positive definite");
    if (kappa > 0.0) {
        r.q1 = r.C1 * r.BtP_norm / kappa + b.Z_M;
        r.e_radius = (kappa * r.q1 * r.q1 + 4.0 * r.q0) / (2.0 * r.lambda_min_Q);
        r.Z_radius = 0.5 * r.q1 + std::sqrt(0.25 * r.q1 * r.q1 + r.q0 / kappa);
    }
    return r;
}

inline BoundReport bound_constants(const NnBounds& b, const AugmentedSystem& sys, const LstmParams& lstm,
                                   double C_m, double kappa, const Matrix& Q_lyap) {
    return bound_constants(b, sys, output_bound(lstm), C_m, kappa, Q_lyap);
}

/// (e_radius, Z_radius); throws KappaZero when the report was built with kappa = 0.
inline std::pair<double, double> uub_radii(const BoundReport& r) {
    detail::require(r.has_radii(), ErrorKind::KappaZero, "ultimate bounds need kappa > 0");
    return {*r.e_radius, *r.Z_radius};
}

/// k_z = 0 disables the robustifying term; otherwise it must exceed C2.
inline bool k_z_admissible(double k_z, const BoundReport& r) { return k_z == 0.0 || k_z > r.C2; }

/// 1.05 max ||x_m(t)|| of the reference model from x_m(0) = 0 over [0, horizon], RK4 at dt.
inline double estimate_Cm(const Matrix& A_m, const Matrix& B_m, const std::function<Vector(double)>& r,
                          double horizon, double dt = 0.01) {
    detail::require(horizon > 0.0 && dt > 0.0, ErrorKind::InvalidArgument, "horizon and dt must be positive");
    detail::require(A_m.rows() == A_m.cols() && B_m.rows() == A_m.rows(), ErrorKind::DimensionMismatch,
                    "A_m " + detail::shape(A_m) + " and B_m " + detail::shape(B_m) + " do not conform");
    const Eigen::Index N = step_count(horizon, dt);
    Vector xm = Vector::Zero(A_m.rows());
    double peak = 0.0;
    for (Eigen::Index k = 0; k < N; ++k) {
        const double t = double(k) * dt;
        const Vector Br = B_m * r(t);
        const Vector k1 = A_m * xm + Br;
        const Vector k2 = A_m * (xm + 0.5 * dt * k1) + Br;
        const Vector k3 = A_m * (xm + 0.5 * dt * k2) + Br;
        const Vector k4 = A_m * (xm + dt * k3) + Br;
        xm += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        detail::check_bounded(xm, "x_m", t + dt);
        peak = std::max(peak, xm.norm());
    }
    return 1.05 * peak;
}

inline double estimate_Cm(const AugmentedSystem& sys, const CommandSpec& spec, double horizon, double dt = 0.01) {
    return estimate_Cm(sys.loop.closed_A_m, sys.B_m,
                       [&](double t) { return Vector::Constant(sys.s, reference_command(t, spec)); }, horizon,
                       dt);
}

/// Fraction of signal energy passed by a first-order high-pass at `cutoff_hz`, realised as the
/// difference recursion h_k = a (h_{k-1} + u_k - u_{k-1}), a = RC / (RC + dt). Zero signal gives 0.
inline double hf_energy_ratio(const Eigen::RowVectorXd& u, double dt, double cutoff_hz = 1.0) {
    detail::require(dt > 0.0 && cutoff_hz > 0.0, ErrorKind::InvalidArgument, "dt and cutoff must be positive");
    const double total = u.squaredNorm();
    if (u.size() < 2 || total == 0.0) return 0.0;
    const double rc = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
    const double a = rc / (rc + dt);
    double h = 0.0, high = 0.0;
    for (Eigen::Index k = 1; k < u.size(); ++k) {
        h = a * (h + u(k) - u(k - 1));
        high += h * h;
    }
    return high / total;
}

struct TraceMetrics {
    Eigen::Index steps = 0;  // rows in the trace
    Vector e_rms, e_max;     // per error component
    double pitch_rate_rms = 0.0;
    double pitch_rate_max = 0.0;
    Vector effort_u_bl, effort_u_ad, effort_u_lstm, effort_v;  // sum |u| dt per channel
    Eigen::Index saturation_steps = 0;       // |u_applied - u_cmd| > 1e-12 on any channel
    Eigen::Index rate_saturation_steps = 0;  // u_r nonzero on any channel
    Vector hf_u_cmd, hf_u_ad, hf_u_lstm;     // high-frequency ratio per channel
};

inline constexpr Eigen::Index kPitchRateError = 1;

inline TraceMetrics trace_metrics(const EpisodeTrace& tr, Eigen::Index pitch_index = kPitchRateError) {
    const Eigen::Index N = tr.rows();
    detail::require(N > 0, ErrorKind::EmptyTrace, "trace has no rows");
    detail::require(tr.e.cols() == N && pitch_index >= 0 && pitch_index < tr.e.rows(),
                    ErrorKind::DimensionMismatch, "error matrix does not match the trace");
    TraceMetrics mt;
    mt.steps = N;
    mt.e_rms = (tr.e.rowwise().squaredNorm() / double(N)).cwiseSqrt();
    mt.e_max = tr.e.cwiseAbs().rowwise().maxCoeff();
    mt.pitch_rate_rms = mt.e_rms(pitch_index);
    mt.pitch_rate_max = mt.e_max(pitch_index);
    auto effort = [&](const Matrix& u) -> Vector { return u.cwiseAbs().rowwise().sum() * tr.dt; };
    mt.effort_u_bl = effort(tr.u_bl);
    mt.effort_u_ad = effort(tr.u_ad);
    mt.effort_u_lstm = effort(tr.u_lstm);
    mt.effort_v = effort(tr.v);
    for (Eigen::Index k = 0; k < N; ++k) {
        if (((tr.u_applied.col(k) - tr.u_cmd.col(k)).cwiseAbs().array() > 1e-12).any()) ++mt.saturation_steps;
        if ((tr.u_r.col(k).array() != 0.0).any()) ++mt.rate_saturation_steps;
    }
    auto hf = [&](const Matrix& u) {
        Vector out(u.rows());
        for (Eigen::Index j = 0; j < u.rows(); ++j) out(j) = hf_energy_ratio(u.row(j), tr.dt);
        return out;
    };
    mt.hf_u_cmd = hf(tr.u_cmd);
    mt.hf_u_ad = hf(tr.u_ad);
    mt.hf_u_lstm = hf(tr.u_lstm);
    return mt;
}

/// Number of steps whose raw LSTM output norm exceeds `u_bar` (plus a relative tolerance).
inline Eigen::Index output_bound_violations(const EpisodeTrace& tr, double u_bar, double rel_tol = 1e-12) {
    Eigen::Index bad = 0;
    for (Eigen::Index k = 0; k < tr.u_lstm_raw.cols(); ++k)
        if (tr.u_lstm_raw.col(k).norm() > u_bar * (1.0 + rel_tol)) ++bad;
    return bad;
}

/// Steps with ||e_k|| > e_radius that are followed by ||e_{k+1}|| > ||e_k|| + tol.
inline Eigen::Index uub_spot_check(const EpisodeTrace& tr, double e_radius, double tol = 1e-6) {
    Eigen::Index bad = 0;
    for (Eigen::Index k = 0; k + 1 < tr.e.cols(); ++k) {
        const double now = tr.e.col(k).norm();
        if (now > e_radius && tr.e.col(k + 1).norm() > now + tol) ++bad;
    }
    return bad;
}

/// Finite-difference rate of the Lyapunov candidate e^T P e along the trace.
inline Vector lyapunov_rate(const EpisodeTrace& tr, const Matrix& P) {
    const Eigen::Index N = tr.e.cols();
    detail::require(N >= 2 && tr.dt > 0.0, ErrorKind::EmptyTrace, "need at least two rows");
    Vector rate(N - 1);
    for (Eigen::Index k = 0; k + 1 < N; ++k) {
        const double v0 = tr.e.col(k).dot(P * tr.e.col(k));
        const double v1 = tr.e.col(k + 1).dot(P * tr.e.col(k + 1));
        rate(k) = (v1 - v0) / tr.dt;
    }
    return rate;
}

struct Comparison {
    Vector e_rms_ratio;  // b / a per component
    double pitch_rate_rms_ratio = 0.0;
    double pitch_rate_max_ratio = 0.0;
    Vector effort_u_bl_ratio, effort_u_ad_ratio, effort_u_lstm_ratio, effort_v_ratio;
    double saturation_ratio = 0.0;
    double rate_saturation_ratio = 0.0;
    [[nodiscard]] bool improved() const { return pitch_rate_rms_ratio < 1.0; }
};

namespace detail {

// 0/0 reads as "unchanged".
inline double ratio(double b, double a) {
    if (a == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return b / a;
}

inline Vector ratio(const Vector& b, const Vector& a) {
    Vector r(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) r(i) = ratio(b(i), a(i));
    return r;
}

}  // namespace detail

/// Metric ratios b / a for two traces on the same time grid.
inline Comparison compare_traces(const EpisodeTrace& a, const EpisodeTrace& b) {
    detail::require(a.rows() > 0 && b.rows() > 0, ErrorKind::EmptyTrace, "cannot compare empty traces");
    detail::require(a.rows() == b.rows() && a.t == b.t, ErrorKind::GridMismatch,
                    "traces have different time grids (" + std::to_string(a.rows()) + " vs " +
                        std::to_string(b.rows()) + " rows)");
    detail::require(a.e.rows() == b.e.rows() && a.u_cmd.rows() == b.u_cmd.rows(), ErrorKind::DimensionMismatch,
                    "traces have different dimensions");
    const TraceMetrics ma = trace_metrics(a), mb = trace_metrics(b);
    Comparison c;
    c.e_rms_ratio = detail::ratio(mb.e_rms, ma.e_rms);
    c.pitch_rate_rms_ratio = detail::ratio(mb.pitch_rate_rms, ma.pitch_rate_rms);
    c.pitch_rate_max_ratio = detail::ratio(mb.pitch_rate_max, ma.pitch_rate_max);
    c.effort_u_bl_ratio = detail::ratio(mb.effort_u_bl, ma.effort_u_bl);
    c.effort_u_ad_ratio = detail::ratio(mb.effort_u_ad, ma.effort_u_ad);
    c.effort_u_lstm_ratio = detail::ratio(mb.effort_u_lstm, ma.effort_u_lstm);
    c.effort_v_ratio = detail::ratio(mb.effort_v, ma.effort_v);
    c.saturation_ratio = detail::ratio(double(mb.saturation_steps), double(ma.saturation_steps));
    c.rate_saturation_ratio = detail::ratio(double(mb.rate_saturation_steps), double(ma.rate_saturation_steps));
    return c;
}

}  // namespace lstm_mrac

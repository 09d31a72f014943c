#pragma once

// Uncertain plant, its integral-action augmentation and the saturating actuator.

#include <algorithm>
#include <functional>
#include <utility>

#include "regulator.hpp"

namespace lstm_mrac {

/// Matched uncertainty f(x_p, t) -> R^m. The time argument carries scheduled experiments.
using Uncertainty = std::function<Vector(const Vector& x_p, double t)>;

inline Uncertainty zero_uncertainty(Eigen::Index m) {
    return [m](const Vector&, double) { return Vector::Zero(m); };
}

struct PlantModel {
    Matrix A_p;  // n_p x n_p
    Matrix B_p;  // n_p x m
    Matrix C_p;  // n_p x s
    double sat_mag_hi = 1.0;
    double sat_mag_lo = -1.0;
    double sat_rate = 1.0;  // units / s
    double b_x = 1.0;

    [[nodiscard]] Eigen::Index n_p() const { return A_p.rows(); }
    [[nodiscard]] Eigen::Index m() const { return B_p.cols(); }
    [[nodiscard]] Eigen::Index s() const { return C_p.cols(); }

    void validate() const {
        using detail::require;
        require(A_p.rows() == A_p.cols(), ErrorKind::NonSquare, "A_p is " + detail::shape(A_p));
        require(B_p.rows() == A_p.rows(), ErrorKind::DimensionMismatch,
                "B_p is " + detail::shape(B_p) + ", expected " + std::to_string(A_p.rows()) + " rows");
        require(C_p.rows() == A_p.rows(), ErrorKind::DimensionMismatch,
                "C_p is " + detail::shape(C_p) + ", expected " + std::to_string(A_p.rows()) + " rows");
        require(B_p.cols() >= 1 && C_p.cols() >= 1, ErrorKind::DimensionMismatch,
                "plant needs at least one input and one output");
        require(A_p.allFinite() && B_p.allFinite() && C_p.allFinite(), ErrorKind::NonFinite,
                "plant matrices must be finite");
        require(sat_mag_lo < 0.0 && 0.0 < sat_mag_hi, ErrorKind::InvalidArgument,
                "saturation limits must bracket zero");
        require(sat_rate > 0.0, ErrorKind::InvalidArgument, "sat_rate must be positive");
        require(b_x > 0.0, ErrorKind::InvalidArgument, "b_x must be positive");
    }
};

/// x = [x_p; x_e] with x_e' = r - C_p^T x_p.
struct AugmentedSystem {
    Matrix A;    // n x n
    Matrix B_m;  // n x s
    Matrix B;    // n x m
    Matrix C;    // n x s
    StabilizedLoop loop;
    Matrix PB;   // loop.lyap_P * B, reused by the adaptive laws and the robustifying term
    PlantModel plant;
    Eigen::Index n_p = 0, s = 0, m = 0, n = 0;
};

inline AugmentedSystem build_augmented(const PlantModel& plant, const Matrix& Q_lqr, const Matrix& R_lqr,
                                       const Matrix& Q_lyap) {
    plant.validate();
    AugmentedSystem sys;
    sys.plant = plant;
    sys.n_p = plant.n_p();
    sys.s = plant.s();
    sys.m = plant.m();
    sys.n = sys.n_p + sys.s;
    const auto n_p = sys.n_p, s = sys.s, m = sys.m, n = sys.n;

    sys.A = Matrix::Zero(n, n);
    sys.A.topLeftCorner(n_p, n_p) = plant.A_p;
    sys.A.bottomLeftCorner(s, n_p) = -plant.C_p.transpose();

    sys.B_m = Matrix::Zero(n, s);
    sys.B_m.bottomRows(s) = -Matrix::Identity(s, s);

    sys.B = Matrix::Zero(n, m);
    sys.B.topRows(n_p) = plant.B_p;

    sys.C = Matrix::Zero(n, s);
    sys.C.topRows(n_p) = -plant.C_p;

    sys.loop = lqr_gain(sys.A, sys.B, Q_lqr, R_lqr);
    sys.loop.lyap_P = solve_lyapunov(sys.loop.closed_A_m, Q_lyap);
    sys.PB = sys.loop.lyap_P * sys.B;
    return sys;
}

/// Known-A_p form of a plant with unknown state matrix: A_p = A_u - B_p K_u and
/// f(x_p) = K_u x_p + f_u(x_p).
struct MatchedForm {
    Matrix A_p;
    Uncertainty f;
};

inline MatchedForm matching_transform(const Matrix& A_u, const Matrix& B_p, const Matrix& K_u,
                                      Uncertainty f_u) {
    detail::require(A_u.rows() == A_u.cols(), ErrorKind::NonSquare, "A_u is " + detail::shape(A_u));
    detail::require(B_p.rows() == A_u.rows(), ErrorKind::DimensionMismatch,
                    "B_p is " + detail::shape(B_p));
    detail::require(K_u.rows() == B_p.cols() && K_u.cols() == A_u.cols(), ErrorKind::DimensionMismatch,
                    "K_u is " + detail::shape(K_u) + ", expected " + std::to_string(B_p.cols()) + "x" +
                        std::to_string(A_u.cols()));
    MatchedForm out;
    out.A_p = A_u - B_p * K_u;
    out.f = [K_u, f_u = std::move(f_u)](const Vector& x_p, double t) -> Vector {
        return K_u * x_p + f_u(x_p, t);
    };
    return out;
}

enum class RateFlag { none, positive, negative };

/// Rate-limit-informed LSTM input value for a flag: +0.1, -0.1 or 0.
inline double rate_flag_value(RateFlag flag) {
    switch (flag) {
    case RateFlag::positive: return 0.1;
    case RateFlag::negative: return -0.1;
    case RateFlag::none: break;
    }
    return 0.0;
}

struct ActuatorState {
    double deflection = 0.0;
    RateFlag rate_flag = RateFlag::none;
};

/// Rate limit first, then magnitude clamp. The flag is raised only when the rate limit is what
/// bounds the output, so sitting at a magnitude stop does not count as rate saturation.
inline ActuatorState actuator_apply(double command, const ActuatorState& act, double dt,
                                    const PlantModel& limits) {
    ActuatorState out;
    const double max_step = limits.sat_rate * dt;
    double next = command;
    if (command - act.deflection > max_step) {
        next = act.deflection + max_step;
    } else if (command - act.deflection < -max_step) {
        next = act.deflection - max_step;
    }
    out.deflection = std::clamp(next, limits.sat_mag_lo, limits.sat_mag_hi);
    const double reachable = std::clamp(command, limits.sat_mag_lo, limits.sat_mag_hi) - act.deflection;
    if (reachable > max_step) {
        out.rate_flag = RateFlag::positive;
    } else if (reachable < -max_step) {
        out.rate_flag = RateFlag::negative;
    }
    return out;
}

}  // namespace lstm_mrac

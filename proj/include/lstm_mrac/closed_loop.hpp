#pragma once

// One fixed RK4 step of the coupled plant / reference model / adaptive-weight ODE.

#include <vector>

#include "ann.hpp"

namespace lstm_mrac {

struct LoopState {
    Vector x;       // augmented plant state, n
    Vector x_m;     // reference model state, n
    AnnWeights w;   // adaptive weight estimates
    std::vector<ActuatorState> actuators;  // one per input channel
    double t = 0.0;
};

inline LoopState initial_loop_state(const AugmentedSystem& sys, AnnWeights w) {
    LoopState s;
    s.x = Vector::Zero(sys.n);
    s.x_m = Vector::Zero(sys.n);
    s.w = std::move(w);
    s.actuators.assign(static_cast<std::size_t>(sys.m), ActuatorState{});
    return s;
}

/// u_bl + u_ad + u_lstm + v evaluated at the current state.
struct ControlBreakdown {
    Vector u_bl;
    Vector u_ad;
    Vector f_hat;
    Vector u_total;
};

inline ControlBreakdown control_breakdown(const AugmentedSystem& sys, const LoopState& state,
                                          const Vector& u_lstm, const Vector& v, const AnnConfig& ann) {
    ControlBreakdown c;
    c.u_bl = -sys.loop.gain_K * state.x;
    c.f_hat = ann_forward(state.w, state.x.head(sys.n_p), ann).f_hat;
    c.u_ad = -c.f_hat;
    c.u_total = c.u_bl + c.u_ad + u_lstm + v;
    return c;
}

/// Saturated actuator output for a total command; also returns the new actuator states.
inline Vector apply_actuators(const AugmentedSystem& sys, const Vector& command,
                              std::vector<ActuatorState>& actuators, double dt) {
    Vector applied(command.size());
    for (Eigen::Index j = 0; j < command.size(); ++j) {
        auto& act = actuators[static_cast<std::size_t>(j)];
        act = actuator_apply(command(j), act, dt, sys.plant);
        applied(j) = act.deflection;
    }
    return applied;
}

namespace detail {

inline void check_bounded(const Matrix& m, const char* name, double t) {
    if (!m.allFinite() || (m.size() > 0 && m.cwiseAbs().maxCoeff() > 1e6)) {
        throw Error(ErrorKind::Diverged,
                    std::string(name) + " exceeded 1e6 in magnitude at t=" + std::to_string(t));
    }
}

}  // namespace detail

/// Advances (x, x_m, W_hat, V_hat) by one RK4 step. r, u_lstm and v are held over the step.
/// Without saturation the baseline and adaptive terms are evaluated at every RK stage; with
/// saturation the total command is formed at the step start, passed through the actuator and
/// the resulting deflection is held.
inline LoopState coupled_step(const AugmentedSystem& sys, const LoopState& state, const Vector& r,
                              const Vector& u_lstm, const Vector& v, const Uncertainty& f,
                              const AnnConfig& ann, double dt, bool saturation_on) {
    detail::require(dt > 0.0, ErrorKind::InvalidArgument, "dt must be positive");
    detail::require(state.x.size() == sys.n && state.x_m.size() == sys.n, ErrorKind::DimensionMismatch,
                    "loop state does not match the augmented system");
    detail::require(r.size() == sys.s && u_lstm.size() == sys.m && v.size() == sys.m,
                    ErrorKind::DimensionMismatch, "held inputs do not match the system");

    LoopState next = state;
    Vector held_plant_input;
    if (saturation_on) {
        const ControlBreakdown c = control_breakdown(sys, state, u_lstm, v, ann);
        held_plant_input = apply_actuators(sys, c.u_total, next.actuators, dt);
    } else {
        for (auto& act : next.actuators) act.rate_flag = RateFlag::none;
    }

    const Vector Bm_r = sys.B_m * r;
    const Vector extra = u_lstm + v;
    const auto& A_m = sys.loop.closed_A_m;

    struct Deriv {
        Vector dx, dxm;
        Matrix dW, dV;
    };
    auto derivative = [&](const Vector& x, const Vector& xm, const AnnWeights& w, double ts) {
        const Vector x_p = x.head(sys.n_p);
        const Vector e = x - xm;
        Deriv d;
        Vector plant_in;
        if (saturation_on) {
            plant_in = held_plant_input;
        } else {
            plant_in = -sys.loop.gain_K * x - ann_forward(w, x_p, ann).f_hat + extra;
        }
        d.dx = sys.A * x + Bm_r + sys.B * (plant_in + f(x_p, ts));
        d.dxm = A_m * xm + Bm_r;
        AnnDerivatives dw = ann_weight_derivatives(w, x_p, e, sys, ann);
        d.dW = std::move(dw.dW_hat);
        d.dV = std::move(dw.dV_hat);
        return d;
    };

    const double t0 = state.t;
    const double h = dt;
    const Deriv k1 = derivative(state.x, state.x_m, state.w, t0);
    AnnWeights w2{state.w.W_hat + 0.5 * h * k1.dW, state.w.V_hat + 0.5 * h * k1.dV};
    const Deriv k2 = derivative(state.x + 0.5 * h * k1.dx, state.x_m + 0.5 * h * k1.dxm, w2, t0 + 0.5 * h);
    AnnWeights w3{state.w.W_hat + 0.5 * h * k2.dW, state.w.V_hat + 0.5 * h * k2.dV};
    const Deriv k3 = derivative(state.x + 0.5 * h * k2.dx, state.x_m + 0.5 * h * k2.dxm, w3, t0 + 0.5 * h);
    AnnWeights w4{state.w.W_hat + h * k3.dW, state.w.V_hat + h * k3.dV};
    const Deriv k4 = derivative(state.x + h * k3.dx, state.x_m + h * k3.dxm, w4, t0 + h);

    const double c = h / 6.0;
    next.x = state.x + c * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
    next.x_m = state.x_m + c * (k1.dxm + 2.0 * k2.dxm + 2.0 * k3.dxm + k4.dxm);
    next.w.W_hat = state.w.W_hat + c * (k1.dW + 2.0 * k2.dW + 2.0 * k3.dW + k4.dW);
    next.w.V_hat = state.w.V_hat + c * (k1.dV + 2.0 * k2.dV + 2.0 * k3.dV + k4.dV);
    next.t = t0 + dt;

    detail::check_bounded(next.x, "x", next.t);
    detail::check_bounded(next.x_m, "x_m", next.t);
    detail::check_bounded(next.w.W_hat, "W_hat", next.t);
    detail::check_bounded(next.w.V_hat, "V_hat", next.t);
    return next;
}

}  // namespace lstm_mrac

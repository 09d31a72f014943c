#pragma once

// B-747 short-period experiment: plant, training/test uncertainty schedules, reference command.

#include <numbers>

#include "plant.hpp"

namespace lstm_mrac {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Short-period dynamics at 274 m/s and 6000 m. States are angle of attack and pitch rate in
/// radians; the output is pitch rate. Elevator limits +17/-23 deg and +-37 deg/s.
inline PlantModel b747_model() {
    PlantModel p;
    p.A_p.resize(2, 2);
    p.A_p << -0.32, 0.86,
             -0.93, -0.43;
    p.B_p.resize(2, 1);
    p.B_p << -0.02, -1.16;
    p.C_p.resize(2, 1);
    p.C_p << 0.0, 1.0;
    p.sat_mag_hi = deg_to_rad(17.0);
    p.sat_mag_lo = deg_to_rad(-23.0);
    p.sat_rate = deg_to_rad(37.0);
    p.b_x = 1.0;
    return p;
}

namespace detail {

inline constexpr double kScheduleSlack = 1e-9;

inline double clamped_tan(double z) { return std::clamp(std::tan(z), -1e6, 1e6); }

// 0.1 |x2|^x1, extended continuously to x2 = 0 and capped at 1e6 in magnitude.
inline double abs_power(double base_x2, double exponent_x1) {
    const double a = std::abs(base_x2);
    if (a == 0.0) return exponent_x1 > 0.0 ? 0.0 : (exponent_x1 == 0.0 ? 1.0 : 1e6);
    return std::min(std::exp(exponent_x1 * std::log(a)), 1e6);
}

inline void check_schedule(double t, double end, const char* name) {
    if (!(t >= -kScheduleSlack && t <= end + kScheduleSlack)) {
        throw Error(ErrorKind::OutOfSchedule,
                    std::string(name) + " is defined on [0, " + std::to_string(end) + "], got t=" +
                        std::to_string(t));
    }
}

}  // namespace detail

/// Training uncertainty schedule over [0, 60] s; x1, x2 are angle of attack and pitch rate.
inline double f_train(const Vector& x, double t) {
    detail::check_schedule(t, 60.0, "f_train");
    const double x1 = x(0), x2 = x(1);
    const double p = x1 * x2;
    if (t < 5.0) return 0.1 * p;
    if (t < 10.0) return std::exp(x2);
    if (t < 15.0) return 2.0 * p;
    if (t < 20.0) return -0.1 * std::cos(x1);
    if (t < 25.0) return 0.5 * p;
    if (t < 30.0) return 0.1 * p;
    if (t < 35.0) return -p * (std::sin(5.0 * p) + 5.0 * std::sin(x2));
    if (t < 45.0) return p * (3.0 * std::sin(2.0 * p) + 2.0 * x1);
    if (t < 55.0) return -p * 2.0 * (detail::clamped_tan(2.0 * p) + x2 * x2);
    return p * (x1 + x2);
}

/// Test uncertainty schedule over [0, 110] s.
inline double f_test(const Vector& x, double t) {
    detail::check_schedule(t, 110.0, "f_test");
    const double x1 = x(0), x2 = x(1);
    if (t < 2.0) return 0.0;
    if (t < 8.0) return -0.1 * std::exp(x1 * x2);
    if (t < 12.0) return 0.5 * x2 * x2;
    if (t < 20.0) return 0.05 * std::exp(x1 + 2.0 * x2);
    if (t < 28.0) return -0.1 * std::sin(0.05 * x1 * x2);
    if (t < 34.0) return 0.1 * (x1 * x1 + x2 * x2 * x2);
    if (t < 40.0) return -0.1 * std::abs(std::cos(x2));  // sqrt(cos^2)
    if (t < 49.0) return -0.2 * std::sin(x1 * x2);
    if (t < 53.0) return 0.1 * (x1 * x2) * (x1 * x2);
    if (t < 60.0) return 0.5 * x2;
    if (t < 67.0) return 0.1 * detail::abs_power(x2, x1);
    if (t < 79.0) return -0.5 * std::sin(x2);
    if (t < 86.0) return 0.01 * std::exp(x1);
    if (t < 98.0) return -0.4 * x1 * x1;
    return 0.2 * x2 * x2;
}

enum class ScheduleKind { train, test };

/// Scalar schedule wrapped as a single-channel matched uncertainty, multiplied by `scale`.
inline Uncertainty scheduled_uncertainty(ScheduleKind kind, double scale) {
    if (kind == ScheduleKind::train)
        return [scale](const Vector& x_p, double t) { return Vector::Constant(1, scale * f_train(x_p, t)); };
    return [scale](const Vector& x_p, double t) { return Vector::Constant(1, scale * f_test(x_p, t)); };
}

inline double schedule_end(ScheduleKind kind) { return kind == ScheduleKind::train ? 60.0 : 110.0; }

struct CommandSpec {
    enum class Kind { constant, doublet };
    Kind kind = Kind::doublet;
    double amplitude = 0.1;  // doublet amplitude, or the constant value
    double period = 20.0;
    double phase = 0.0;      // seconds

    static CommandSpec constant(double value) {
        CommandSpec c;
        c.kind = Kind::constant;
        c.amplitude = value;
        return c;
    }
    static CommandSpec doublet(double amplitude, double period, double phase = 0.0) {
        CommandSpec c;
        c.kind = Kind::doublet;
        c.amplitude = amplitude;
        c.period = period;
        c.phase = phase;
        return c;
    }
};

/// +amplitude over the first half of each period, -amplitude over the second half.
inline double reference_command(double t, const CommandSpec& spec) {
    if (spec.kind == CommandSpec::Kind::constant) return spec.amplitude;
    detail::require(spec.period > 0.0, ErrorKind::InvalidArgument, "doublet period must be positive");
    const double cycle = std::fmod(t + spec.phase, spec.period);
    const double wrapped = cycle < 0.0 ? cycle + spec.period : cycle;
    return wrapped < 0.5 * spec.period ? spec.amplitude : -spec.amplitude;
}

}  // namespace lstm_mrac

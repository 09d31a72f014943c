#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lstm_mrac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
    DimensionMismatch,
    NonSquare,
    NonHurwitz,
    SingularSystem,
    NotControllable,
    NoConvergence,
    Diverged,
    OutOfSchedule,
    DegenerateRange,
    LengthMismatch,
    NonFinite,
    KappaZero,
    EmptyTrace,
    GridMismatch,
    InvalidArgument,
    Io,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonSquare: return "NonSquare";
    case ErrorKind::NonHurwitz: return "NonHurwitz";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NotControllable: return "NotControllable";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::OutOfSchedule: return "OutOfSchedule";
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::KappaZero: return "KappaZero";
    case ErrorKind::EmptyTrace: return "EmptyTrace";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

namespace detail {

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) throw Error(kind, message);
}

inline std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// splitmix64; used to derive independent per-episode seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

}  // namespace lstm_mrac

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace helm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reasons a network or case document is rejected.
enum class ValidationCode {
    MalformedJson,
    Schema,
    DuplicateBusId,
    NoSwing,
    MultipleSwing,
    UnknownBus,
    SelfLoop,
    ZeroImpedance,
    NonPositiveTap,
    NonPositiveSetpoint,
    Disconnected,
};

inline const char* to_string(ValidationCode code) {
    switch (code) {
        case ValidationCode::MalformedJson: return "malformed_json";
        case ValidationCode::Schema: return "schema";
        case ValidationCode::DuplicateBusId: return "duplicate_bus_id";
        case ValidationCode::NoSwing: return "no_swing";
        case ValidationCode::MultipleSwing: return "multiple_swing";
        case ValidationCode::UnknownBus: return "unknown_bus";
        case ValidationCode::SelfLoop: return "self_loop";
        case ValidationCode::ZeroImpedance: return "zero_impedance";
        case ValidationCode::NonPositiveTap: return "non_positive_tap";
        case ValidationCode::NonPositiveSetpoint: return "non_positive_setpoint";
        case ValidationCode::Disconnected: return "disconnected";
    }
    return "unknown";
}

/// Invalid network data, either from a case file or built in memory.
class ValidationError : public Error {
public:
    ValidationError(ValidationCode code, const std::string& message,
                    std::optional<int> bus_id = std::nullopt)
        : Error(message), code_(code), bus_id_(bus_id) {}

    ValidationCode code() const noexcept { return code_; }
    /// Offending bus id, when the error concerns one bus.
    std::optional<int> bus_id() const noexcept { return bus_id_; }

private:
    ValidationCode code_;
    std::optional<int> bus_id_;
};

/// A factorization hit a zero (or numerically negligible) pivot.
class SingularMatrixError : public Error {
public:
    SingularMatrixError(std::size_t pivot, const std::string& message)
        : Error(message), pivot_(pivot) {}

    /// Elimination step (0-based) at which no usable pivot was found.
    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

/// Germ construction or extension failed.
class SeriesError : public Error {
public:
    using Error::Error;
};

/// The Toeplitz system behind an [L/M] approximant has no solution.
class DegeneratePadeError : public Error {
public:
    using Error::Error;
};

}  // namespace helm

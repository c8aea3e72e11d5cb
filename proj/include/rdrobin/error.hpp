#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rdrobin {

enum class ErrorCode {
    NotBistable,
    NoThetaFound,
    QuadratureFailure,
    DerivativeUnavailable,
    InversionFailure,
    InvalidM,
    InvalidArgument,
    NumericalBlowup,
    NegativeUndershoot,
    BracketNotFound,
    RegimeMismatch,
    WindowTooShort,
    NegativeProfile,
    UnknownSubcommand,
    ConfigParseError,
    IoError,
};

constexpr std::string_view to_string(ErrorCode c) noexcept {
    switch (c) {
        case ErrorCode::NotBistable: return "NotBistable";
        case ErrorCode::NoThetaFound: return "NoThetaFound";
        case ErrorCode::QuadratureFailure: return "QuadratureFailure";
        case ErrorCode::DerivativeUnavailable: return "DerivativeUnavailable";
        case ErrorCode::InversionFailure: return "InversionFailure";
        case ErrorCode::InvalidM: return "InvalidM";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NumericalBlowup: return "NumericalBlowup";
        case ErrorCode::NegativeUndershoot: return "NegativeUndershoot";
        case ErrorCode::BracketNotFound: return "BracketNotFound";
        case ErrorCode::RegimeMismatch: return "RegimeMismatch";
        case ErrorCode::WindowTooShort: return "WindowTooShort";
        case ErrorCode::NegativeProfile: return "NegativeProfile";
        case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
        case ErrorCode::ConfigParseError: return "ConfigParseError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Validation-type errors (bad input, bad config) versus numerical failures.
/// The CLI maps the former to exit code 2 and the latter to 3.
constexpr bool is_validation_error(ErrorCode c) noexcept {
    switch (c) {
        case ErrorCode::NotBistable:
        case ErrorCode::NoThetaFound:
        case ErrorCode::InvalidM:
        case ErrorCode::InvalidArgument:
        case ErrorCode::RegimeMismatch:
        case ErrorCode::UnknownSubcommand:
        case ErrorCode::ConfigParseError:
        case ErrorCode::DerivativeUnavailable:
            return true;
        default:
            return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace rdrobin

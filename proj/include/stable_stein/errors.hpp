#pragma once

#include <stdexcept>
#include <string>

namespace stable_stein {

/// Broad classification used by front ends to map failures onto exit codes.
enum class ErrorKind {
    parameter,  ///< caller supplied an invalid argument or an unusable configuration
    numerical,  ///< a numerical procedure failed to meet its contract
    io          ///< reading or writing an external resource failed
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string name, const std::string& message)
        : std::runtime_error(name + ": " + message), kind_(kind), name_(std::move(name)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }

private:
    ErrorKind kind_;
    std::string name_;
};

#define STABLE_STEIN_DEFINE_ERROR(Name, Kind)                                  \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& message)                              \
            : Error(ErrorKind::Kind, #Name, message) {}                        \
    };

// quadrature
STABLE_STEIN_DEFINE_ERROR(NonConvergent, numerical)
STABLE_STEIN_DEFINE_ERROR(InvalidInterval, parameter)
STABLE_STEIN_DEFINE_ERROR(NonFiniteEvaluation, numerical)
STABLE_STEIN_DEFINE_ERROR(EnvelopeViolated, numerical)
STABLE_STEIN_DEFINE_ERROR(InvalidConfig, parameter)

// stable law
STABLE_STEIN_DEFINE_ERROR(OutOfRangeAlpha, parameter)
STABLE_STEIN_DEFINE_ERROR(InvalidParameter, parameter)
STABLE_STEIN_DEFINE_ERROR(NonPositiveA, parameter)
STABLE_STEIN_DEFINE_ERROR(TableMismatch, parameter)
STABLE_STEIN_DEFINE_ERROR(SelfTestFailed, numerical)

// Stein operator
STABLE_STEIN_DEFINE_ERROR(NonPositiveScale, parameter)
STABLE_STEIN_DEFINE_ERROR(LipschitzBoundMissing, parameter)
STABLE_STEIN_DEFINE_ERROR(InvalidTestFunction, parameter)

// entry laws
STABLE_STEIN_DEFINE_ERROR(InvalidFamilyParams, parameter)
STABLE_STEIN_DEFINE_ERROR(InversionFailure, numerical)
STABLE_STEIN_DEFINE_ERROR(NoConvergence, numerical)

// bounds
STABLE_STEIN_DEFINE_ERROR(PreconditionViolated, parameter)
STABLE_STEIN_DEFINE_ERROR(NotUltimatelyMonotone, parameter)

// benchmarks
STABLE_STEIN_DEFINE_ERROR(InvalidPlan, parameter)
STABLE_STEIN_DEFINE_ERROR(EmptySample, parameter)
STABLE_STEIN_DEFINE_ERROR(InsufficientPoints, parameter)
STABLE_STEIN_DEFINE_ERROR(IoError, io)

#undef STABLE_STEIN_DEFINE_ERROR

}  // namespace stable_stein

#pragma once

#include <stdexcept>
#include <string>

namespace vmstab {

enum class ErrorKind {
    NonConvergence,
    NeutralityViolation,
    TailTooLarge,
    StepFailure,
    GridMismatch,
    ProjectionDisagreement,
    AsymmetryTooLarge,
    EigFailure,
    DegenerateCut,
    DimensionMismatch,
    SingularPivot,
    HypothesisFailure,
    BracketLost,
    TrivialKernel,
    NoConvergence,
    ConfigError,
    IoError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace vmstab

#include "vmstab/errors.hpp"

namespace vmstab {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::NeutralityViolation: return "NeutralityViolation";
        case ErrorKind::TailTooLarge: return "TailTooLarge";
        case ErrorKind::StepFailure: return "StepFailure";
        case ErrorKind::GridMismatch: return "GridMismatch";
        case ErrorKind::ProjectionDisagreement: return "ProjectionDisagreement";
        case ErrorKind::AsymmetryTooLarge: return "AsymmetryTooLarge";
        case ErrorKind::EigFailure: return "EigFailure";
        case ErrorKind::DegenerateCut: return "DegenerateCut";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::SingularPivot: return "SingularPivot";
        case ErrorKind::HypothesisFailure: return "HypothesisFailure";
        case ErrorKind::BracketLost: return "BracketLost";
        case ErrorKind::TrivialKernel: return "TrivialKernel";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace vmstab

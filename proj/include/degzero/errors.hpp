#pragma once
#include <stdexcept>
#include <string>

namespace degzero {

// Two families: the caller asked for something outside an operation's
// domain, or a numerical procedure could not deliver its certificate.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define DEGZERO_ERROR(Name, Base)                                     \
    struct Name : Base {                                              \
        explicit Name(const std::string& what) : Base(#Name ": " + what) {} \
    };

DEGZERO_ERROR(CriticalSlope, DomainError)
DEGZERO_ERROR(CornerAbsorbed, DomainError)
DEGZERO_ERROR(SectionUnavailable, DomainError)
DEGZERO_ERROR(InvalidBump, DomainError)
DEGZERO_ERROR(EmptyShell, DomainError)
DEGZERO_ERROR(AtomTooClose, DomainError)
DEGZERO_ERROR(DegenerateLevel, DomainError)
DEGZERO_ERROR(DegenerateResonance, DomainError)
DEGZERO_ERROR(GrowthViolation, DomainError)
DEGZERO_ERROR(EmptyData, DomainError)

DEGZERO_ERROR(NoConvergence, NumericalFailure)
DEGZERO_ERROR(NotConverged, NumericalFailure)
DEGZERO_ERROR(BasinEscape, NumericalFailure)
DEGZERO_ERROR(QuadratureFailure, NumericalFailure)
DEGZERO_ERROR(HolderViolation, NumericalFailure)
DEGZERO_ERROR(ExtrapolationUnstable, NumericalFailure)

#undef DEGZERO_ERROR

}  // namespace degzero

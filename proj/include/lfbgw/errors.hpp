#ifndef LFBGW_ERRORS_HPP
#define LFBGW_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace lfbgw {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed model document (bad JSON, wrong shapes, duplicate sparse entries).
struct ParseError : Error {
    using Error::Error;
};

struct Violation {
    std::string rule;  // e.g. "H.substochastic"
    int row = -1;      // 0-based row/element index, -1 for scalar rules
    int col = -1;      // 0-based column index, -1 when not applicable
    double value = 0.0;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;
};

// A model invariant is violated; carries the full report.
struct ValidationError : Error {
    ValidationReport report;
    explicit ValidationError(std::string msg, ValidationReport rep)
        : Error(std::move(msg)), report(std::move(rep)) {}
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// A series or iteration hit its budget before reaching tolerance.
struct NotConverged : Error {
    using Error::Error;
};

// Operation requires a supercritical model (mu > 1).
struct NotSupercritical : Error {
    using Error::Error;
};

// Conditioning on extinction is degenerate: rho = 1+m or some q_i = 0
// (or q_i = 1, which makes conditioning on survival degenerate).
struct DualDegenerate : Error {
    using Error::Error;
};

// Closed-form q and fixed-point q disagree beyond tolerance; the series
// truncation is too coarse for this model.
struct FixedPointMismatch : Error {
    using Error::Error;
};

// alpha_i fell outside (0,1); inputs are inconsistent.
struct AlphaOutOfRange : Error {
    using Error::Error;
};

// Simulated population exceeded the configured cap.
struct PopulationOverflow : Error {
    using Error::Error;
};

// Statistics requested over an empty sample set.
struct EmptySamples : Error {
    using Error::Error;
};

}  // namespace lfbgw

#endif

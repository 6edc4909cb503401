#pragma once

#include <stdexcept>
#include <string>

namespace qlt {

// Configuration problems: bad input files, bad key values. CLI exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : ConfigError {
    int line = 0, column = 0;
    ParseError(const std::string& msg, int line_, int col_)
        : ConfigError(msg), line(line_), column(col_) {}
};

struct UnknownKey : ConfigError {
    using ConfigError::ConfigError;
};

struct RangeError : ConfigError {
    using ConfigError::ConfigError;
};

// Numerical failures during a run. CLI exit code 2.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fewer alive points than the fit basis needs.
struct InsufficientPoints : NumericError {
    using NumericError::NumericError;
};

// Requested derivative order exceeds the fitted polynomial degree.
struct OrderTooHigh : NumericError {
    using NumericError::NumericError;
};

// More than 10% of points failed their local fits: the grid has degenerated.
struct StencilCollapse : NumericError {
    using NumericError::NumericError;
};

// Explicit-scheme time step exceeds the stability bound.
struct StabilityViolation : NumericError {
    using NumericError::NumericError;
};

// Ensemble has no eta = 0 row, so the trace is undefined.
struct MissingDiagonal : NumericError {
    using NumericError::NumericError;
};

// Parity enforcement requires an eta-symmetric grid.
struct NoMirror : NumericError {
    using NumericError::NumericError;
};

}  // namespace qlt

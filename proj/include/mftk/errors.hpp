#pragma once

#include <stdexcept>
#include <string>

namespace mftk {

// Base for all domain errors. CLI maps these to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// trace
struct IoError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct InvalidScale : Error { using Error::Error; };
struct ZeroMass : Error { using Error::Error; };
struct NonDyadicLength : Error { using Error::Error; };

// fractal_analysis
struct TooFewScales : Error { using Error::Error; };
struct ZeroVariancePoint : Error { using Error::Error; };
struct InsufficientDepth : Error { using Error::Error; };
struct AllZeroCells : Error { using Error::Error; };
struct DegenerateDenominator : Error { using Error::Error; };

// cascade
struct InvalidHurst : Error { using Error::Error; };
struct Infeasible : Error { using Error::Error; };
struct NonConvergence : Error { using Error::Error; };
struct RecurrenceBreakdown : Error { using Error::Error; };
struct NonErgodicTrace : Error { using Error::Error; };
struct BoundsTooTight : Error { using Error::Error; };

// mmpp
struct TooFewSamples : Error { using Error::Error; };

// netsim
struct ConfigError : Error { using Error::Error; };
struct NoFramesDelivered : Error { using Error::Error; };

} // namespace mftk

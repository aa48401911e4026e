#pragma once

#include <stdexcept>
#include <string>

namespace protocal {

// Base type for every engine error. The CLI maps subclasses onto exit codes:
// config/usage -> 2, data -> 3, estimation -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidInput : Error { using Error::Error; };
struct InvalidShape : Error { using Error::Error; };
struct InvalidConfig : Error { using Error::Error; };
struct InvalidLabel : Error { using Error::Error; };
struct MissingLabels : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

struct InsufficientData : Error { using Error::Error; };
struct SingularCovariance : Error { using Error::Error; };
struct EstimationFailed : Error { using Error::Error; };

struct InvalidAssignment : Error { using Error::Error; };
struct InvalidEstimate : Error { using Error::Error; };
struct OracleTooLarge : Error { using Error::Error; };

struct InvalidScenario : Error { using Error::Error; };
struct BinaryOnly : Error { using Error::Error; };

} // namespace protocal

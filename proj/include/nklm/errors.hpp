#pragma once

#include <stdexcept>
#include <string>

namespace nklm {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };    // tensor dimension mismatch
struct DomainError : Error { using Error::Error; };   // argument outside its valid range
struct ConfigError : Error { using Error::Error; };
struct BuildError : Error { using Error::Error; };    // knowledge memory construction
struct DataError : Error { using Error::Error; };     // inconsistent gold data
struct TrainError : Error { using Error::Error; };    // non-finite loss / gradients
struct OracleError : Error { using Error::Error; };   // finite-difference checker
struct MetricError : Error { using Error::Error; };
struct EvalError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };    // malformed input file
struct VersionError : Error { using Error::Error; };  // schema / checkpoint version
struct IoError : Error { using Error::Error; };

}  // namespace nklm

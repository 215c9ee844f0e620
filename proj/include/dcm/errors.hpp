#pragma once

#include <stdexcept>
#include <string>

namespace dcm {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: configuration/format problems exit 1, runtime/data problems exit 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };  // shape mismatches
struct DomainError : Error { using Error::Error; };     // value outside an op's domain
struct ConfigError : Error { using Error::Error; };     // invalid configuration
struct DataError : Error { using Error::Error; };       // inconsistent dataset contents
struct FormatError : Error { using Error::Error; };     // malformed files
struct IoError : Error { using Error::Error; };         // filesystem failures
struct UsageError : Error { using Error::Error; };      // API contract violations

}  // namespace dcm

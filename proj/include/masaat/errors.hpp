#pragma once

#include <stdexcept>
#include <string>

namespace masaat {

// Base for every error raised by the library. Subclasses name the failing
// contract so callers (and the CLI) can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericDomainError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class IngestionError : public Error { using Error::Error; };
class AlignmentError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class AccountingError : public Error { using Error::Error; };
class UndefinedVolatilityError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class UsageError : public Error { using Error::Error; };

}  // namespace masaat

#pragma once

#include <stdexcept>
#include <string>

namespace tabattack {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// numerics
class DimensionError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class IndexError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };

// data
class IngestionError : public Error { using Error::Error; };
class SplitError : public Error { using Error::Error; };
class FitError : public Error { using Error::Error; };
class DecodeError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };

// models / vae / attacks
class TrainingError : public NumericError { using NumericError::NumericError; };
class StatsError : public NumericError { using NumericError::NumericError; };
class ConfigError : public Error { using Error::Error; };
class UnsupportedTaskError : public ConfigError { using ConfigError::ConfigError; };

// reporting / io
class ReportError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace tabattack

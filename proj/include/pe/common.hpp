#pragma once

#include <cstdarg>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace pe {

// Error taxonomy. The CLI maps these onto exit codes:
// usage errors -> 2, data/config/validation errors -> 3, numeric failures -> 4.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DecodeError : IoError {
  using IoError::IoError;
};
struct UnsupportedFormatError : IoError {
  using IoError::IoError;
};
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainingError : NumericError {
  using NumericError::NumericError;
};
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string strf(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[1024];
  vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return std::string(buf);
}

}  // namespace pe

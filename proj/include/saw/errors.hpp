#ifndef SAW_ERRORS_HPP
#define SAW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace saw {

/// Invalid or unreadable configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing, malformed or misaligned data files (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An engine flagged more degenerate steps than the configured tolerance (exit code 3).
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace saw

#endif  // SAW_ERRORS_HPP

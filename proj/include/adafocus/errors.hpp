#ifndef ADAFOCUS_ERRORS_HPP
#define ADAFOCUS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace adafocus {

// Invalid configuration (bad ranges, impossible settings). CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad runtime input (dimension mismatch, out-of-range index, unreadable file).
// CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation on state that was never initialized (e.g. a saliency entry that
// does not exist). CLI exit code 2.
class StateError : public std::runtime_error {
 public:
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or parameters during training. Carries a description of the
// offending iteration. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace adafocus

#endif  // ADAFOCUS_ERRORS_HPP

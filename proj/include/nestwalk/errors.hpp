#pragma once

#include <stdexcept>
#include <string>

namespace nestwalk {

/// Argument outside the domain of an operation (e.g. horizon past the end of a path).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid request or parameter combination; maps to CLI exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Memory budget or I/O failure; maps to CLI exit code 3.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal inputs disagree with each other (e.g. crossings not derived from the row).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An exact identity failed. The message carries seed, level and index so the
/// case can be replayed.
class IdentityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nestwalk

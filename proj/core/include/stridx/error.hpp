#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stridx {

// Dimension or structural mismatch (wrong rows/cols, empty operand, ...).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite value produced or consumed where finiteness is required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Triangular factor has an (effectively) zero diagonal entry.
class SingularError : public std::runtime_error {
 public:
  SingularError(const std::string& what, std::size_t diag_index)
      : std::runtime_error(what), diag_index_(diag_index) {}
  std::size_t diag_index() const noexcept { return diag_index_; }

 private:
  std::size_t diag_index_;
};

// Zero-length key where a non-empty key is required.
class EmptyKeyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Model fit requested over zero training rows.
class EmptyTrainingSetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bulk input violates the required sort order.
class UnsortedInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bulk input contains a repeated key.
class DuplicateKeyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration value or combination.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dataset file missing, unreadable, or empty.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Report or dataset I/O failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation submitted to a component that has shut down.
class ShutdownError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stridx

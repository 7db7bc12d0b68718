#pragma once

#include <stdexcept>
#include <string>

namespace actuforge {

/// Raised when a value breaks a documented invariant. `path()` is a
/// machine-readable field path such as `motors[3].mass_kg`.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string path, std::string invariant)
      : std::runtime_error(path + ": " + invariant + " violated"),
        path_(std::move(path)),
        invariant_(std::move(invariant)) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string path_;
  std::string invariant_;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solver preconditions, iteration caps and post-hoc verification failures.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StudyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace actuforge

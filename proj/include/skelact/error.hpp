#pragma once

#include <stdexcept>
#include <string>

namespace skelact {

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The observation sequence has probability exactly zero under the model
/// (as opposed to a value too small to represent).
class ZeroProbabilityError : public Error {
 public:
  using Error::Error;
};

/// Prefixes an error message with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace skelact

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace s2a {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class EmptyAudio : public PreconditionError {
 public:
  EmptyAudio() : PreconditionError("audio buffer is empty") {}
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class EmptyScene : public Error {
 public:
  EmptyScene() : Error("scene has no sonic objects") {}
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class DegenerateMarginals : public Error {
 public:
  DegenerateMarginals()
      : Error("expected agreement is 1 but observed agreement is not") {}
};

/// Failure of an external model adapter.
class BackendError : public Error {
 public:
  enum class Kind { Unavailable, Timeout, MalformedResponse, Rejected };

  BackendError(Kind kind, std::string detail)
      : Error(std::string(kind_name(kind)) + ": " + detail),
        kind_(kind),
        detail_(detail.empty() ? std::string("unspecified") : std::move(detail)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

  static constexpr std::string_view kind_name(Kind k) {
    switch (k) {
      case Kind::Unavailable: return "unavailable";
      case Kind::Timeout: return "timeout";
      case Kind::MalformedResponse: return "malformed_response";
      case Kind::Rejected: return "rejected";
    }
    return "unknown";
  }

 private:
  Kind kind_;
  std::string detail_;
};

}  // namespace s2a

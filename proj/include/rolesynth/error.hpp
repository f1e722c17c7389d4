#pragma once

#include <stdexcept>
#include <string>

namespace rolesynth {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed document (JSON, record line, numeric text file).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (maps to CLI usage errors).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to a chat-completion endpoint. `status` is 0 for
/// transport-level failures; `body` carries the raw payload when there is one.
class EndpointError : public Error {
 public:
  EndpointError(const std::string& what, int status = 0, std::string body = {})
      : Error(what), status_(status), body_(std::move(body)) {}

  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

/// No usable structured content could be pulled out of a model response.
class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}

  const std::string& raw_response() const noexcept { return raw_; }

 private:
  std::string raw_;
};

}  // namespace rolesynth

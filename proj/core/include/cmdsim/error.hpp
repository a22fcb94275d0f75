#pragma once

#include <stdexcept>
#include <string>

namespace cmdsim {

// Base of every error thrown by the toolkit. The CLI maps these to exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Missing or malformed configuration (provider files, environment variables).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The network request never produced an HTTP response.
class TransportError : public Error {
 public:
  using Error::Error;
};

// The provider answered with a non-success HTTP status.
class ProviderError : public Error {
 public:
  ProviderError(int status, std::string body)
      : Error("provider returned HTTP " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}

  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

// Data produced by a backend or read from disk is inconsistent.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmdsim

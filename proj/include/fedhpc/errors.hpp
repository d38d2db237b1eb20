#pragma once

#include <stdexcept>
#include <string>

namespace fedhpc {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Mixed base versions in a synchronous round, or an update that claims a
// base version newer than the server's.
class VersionError : public Error {
 public:
  using Error::Error;
};

class UnknownGroupError : public Error {
 public:
  using Error::Error;
};

class ClientBusyError : public Error {
 public:
  using Error::Error;
};

class EmptyQueueError : public Error {
 public:
  using Error::Error;
};

/// Scenario validation failure. `path()` names the offending field, e.g.
/// `facilities[2].queue.sigma`.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace fedhpc

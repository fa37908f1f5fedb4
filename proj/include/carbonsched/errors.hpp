#pragma once

#include <stdexcept>
#include <string>

namespace carbonsched {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid domain data: broken invariants, dimension mismatches, bad ids.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

// Malformed input document (CSV, JSON, schedule file).
class ParseError : public Error {
public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

// Filesystem failure (missing file, unwritable path).
class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(what) {}
};

// Problem too large for the exact method (enumeration or DP state cap).
class InstanceTooLargeError : public Error {
public:
  explicit InstanceTooLargeError(const std::string& what) : Error(what) {}
};

// Network use requested while the client is in offline mode.
class NetworkDisabledError : public Error {
public:
  explicit NetworkDisabledError(const std::string& what) : Error(what) {}
};

// HTTP transport failure or non-success status.
class HttpError : public Error {
public:
  HttpError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const { return status_; }

private:
  int status_;
};

}  // namespace carbonsched

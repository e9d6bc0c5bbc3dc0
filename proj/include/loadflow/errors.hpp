// Exception hierarchy shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace loadflow {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input text (case files, dataset headers, CLI payloads).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

// Structurally valid input that violates a semantic rule.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

// Filesystem / serialization failures (missing file, bad magic, CRC mismatch).
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace loadflow

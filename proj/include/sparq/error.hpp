#pragma once

#include <stdexcept>
#include <string>

namespace sparq {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  Format = 2,           // malformed file / stream, bad arguments
  Shape = 3,            // dimension mismatch
  MissingArtifact = 4,  // a referenced file does not exist
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class MalformedStream : public Error {
 public:
  explicit MalformedStream(const std::string& what) : Error(ErrorKind::Format, what) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& what) : Error(ErrorKind::Shape, what) {}
};

class IndexOutOfRange : public Error {
 public:
  explicit IndexOutOfRange(const std::string& what) : Error(ErrorKind::Shape, what) {}
};

class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::string& what) : Error(ErrorKind::MissingArtifact, what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::Format, what) {}
};

// Raised by the brain-budget solver when the number of unknowns is not exactly one.
class Underdetermined : public Error {
 public:
  explicit Underdetermined(const std::string& what) : Error(ErrorKind::Format, what) {}
};

}  // namespace sparq

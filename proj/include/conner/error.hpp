#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conner {

// Base class for all errors raised by the library. CLI maps these to exit 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller handed us something that violates a precondition.
class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& msg) : Error(msg) {}
};

class InvalidConfigError : public Error {
 public:
  explicit InvalidConfigError(const std::string& msg) : Error(msg) {}
};

// A tag sequence violates the BIOES grammar. Carries the first offending
// token position within the sequence.
class IllegalSequenceError : public Error {
 public:
  IllegalSequenceError(const std::string& msg, std::size_t position)
      : Error(msg + " (position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Malformed input file. Carries the 1-based line number when one applies
// (line 0 means the whole file is at fault).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg), line_(0) {}
  ParseError(const std::string& msg, std::size_t line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A translation engine call failed. Carries the request text so the caller
// can retry or log it.
class EngineError : public Error {
 public:
  EngineError(const std::string& msg, std::string request)
      : Error(msg), request_(std::move(request)) {}
  const std::string& request() const { return request_; }

 private:
  std::string request_;
};

// Training produced a non-finite loss or gradient.
class TrainingDivergedError : public Error {
 public:
  explicit TrainingDivergedError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace conner

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace weakform {

// Root of every error the library throws. `code()` matches the C API status.
class Error : public std::runtime_error {
 public:
  enum class Code {
    invalid_argument = 1,
    syntax,
    unknown_function,
    unbound_variable,
    non_finite,
    grid_mismatch,
    precondition,
    convergence,
    node_detected,
    config,
    io,
  };

  Error(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(Code::invalid_argument, what) {}
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::vector<std::string> expected, const std::string& message);
  // 1-based character offset into the source text.
  std::size_t position() const noexcept { return position_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t position_;
  std::vector<std::string> expected_;
};

class UnknownFunction : public Error {
 public:
  explicit UnknownFunction(std::string name)
      : Error(Code::unknown_function, "unknown function '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class UnboundVariable : public Error {
 public:
  explicit UnboundVariable(std::string name)
      : Error(Code::unbound_variable, "unbound variable '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class NonFiniteValue : public Error {
 public:
  NonFiniteValue(std::size_t index, const std::string& context)
      : Error(Code::non_finite, context + ": non-finite value at flat index " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class GridMismatch : public Error {
 public:
  explicit GridMismatch(const std::string& what) : Error(Code::grid_mismatch, what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(Code::precondition, what) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations)
      : Error(Code::convergence, what), iterations_(iterations) {}
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  std::size_t iterations_;
};

class NodeDetected : public Error {
 public:
  explicit NodeDetected(std::size_t index)
      : Error(Code::node_detected, "wave function node near flat index " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// `pointer` is an RFC 6901 JSON pointer into the offending document.
class ConfigError : public Error {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : Error(Code::config, (pointer.empty() ? std::string("/") : pointer) + ": " + message),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Code::io, what) {}
};

}  // namespace weakform
